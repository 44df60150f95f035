use std::path::PathBuf;

use crate::store::Modality;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    // Store format.
    #[error("bad magic bytes {found:?}, expected \"XMFS\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("corrupt record data: {0}")]
    CorruptRecord(String),
    #[error("non-finite value in record (sample {sample_id}, class {class_id})")]
    NonFiniteValue { sample_id: u32, class_id: u32 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cannot normalize a zero vector")]
    ZeroVector,
    #[error("duplicate record (class {class_id}, {modality}, sample {sample_id}, view {view_id})")]
    DuplicateRecord {
        class_id: u32,
        modality: Modality,
        sample_id: u32,
        view_id: u16,
    },
    #[error("manifest has no name for class {0}")]
    MissingClassName(u32),

    // Episodes.
    #[error("class {class_id} has {available} eligible samples, needs {required}")]
    InsufficientSamples {
        class_id: u32,
        available: usize,
        required: usize,
    },
    #[error("class {class_name:?} not found in {store}")]
    UnmatchedClass { class_name: String, store: String },
    #[error("no samples for fold {fold} of class {class_id}")]
    MissingFold { fold: u8, class_id: u32 },
    #[error("no {modality} records for class {class_id}")]
    MissingClassInModality { class_id: u32, modality: Modality },
    #[error("split manifest references unknown sample {0}")]
    UnknownSample(u32),

    // Models.
    #[error("no text features for class {0}")]
    MissingClassText(u32),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("class order differs between classifiers")]
    ClassOrderMismatch,
    #[error("label {0} is not a class of this classifier")]
    UnknownLabel(u32),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),

    // Training.
    #[error("training set is empty")]
    EmptyTrainset,
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    // Augmentation.
    #[error("template {0:?} must contain exactly one {{cls}} placeholder")]
    BadTemplate(String),
    #[error("missing view {view_id} for sample {sample_id}")]
    MissingView { sample_id: u32, view_id: u16 },

    // Evaluation.
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("class vocabulary mismatch: {0}")]
    ClassVocabularyMismatch(String),
    #[error("covariance is degenerate (all points identical)")]
    DegenerateCovariance,
    #[error("report has no rows")]
    EmptyReport,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    /// Short stable name of the error class, used for one-line diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "IoError",
            Error::Json { .. } => "JsonError",
            Error::BadMagic { .. } => "BadMagic",
            Error::UnsupportedVersion(_) => "UnsupportedVersion",
            Error::CorruptRecord(_) => "CorruptRecord",
            Error::NonFiniteValue { .. } => "NonFiniteValue",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::ZeroVector => "ZeroVector",
            Error::DuplicateRecord { .. } => "DuplicateRecord",
            Error::MissingClassName(_) => "MissingClassName",
            Error::InsufficientSamples { .. } => "InsufficientSamples",
            Error::UnmatchedClass { .. } => "UnmatchedClass",
            Error::MissingFold { .. } => "MissingFold",
            Error::MissingClassInModality { .. } => "MissingClassInModality",
            Error::UnknownSample(_) => "UnknownSample",
            Error::MissingClassText(_) => "MissingClassText",
            Error::ShapeMismatch(_) => "ShapeMismatch",
            Error::ClassOrderMismatch => "ClassOrderMismatch",
            Error::UnknownLabel(_) => "UnknownLabel",
            Error::BadCheckpoint(_) => "BadCheckpoint",
            Error::EmptyTrainset => "EmptyTrainset",
            Error::EmptyGrid => "EmptyGrid",
            Error::InvalidConfig(_) => "InvalidConfig",
            Error::BadTemplate(_) => "BadTemplate",
            Error::MissingView { .. } => "MissingView",
            Error::EmptyTestSet => "EmptyTestSet",
            Error::ClassVocabularyMismatch(_) => "ClassVocabularyMismatch",
            Error::DegenerateCovariance => "DegenerateCovariance",
            Error::EmptyReport => "EmptyReport",
        }
    }
}
