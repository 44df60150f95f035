//! Classification heads over the shared embedding space.
//!
//! [`ClassifierState`] is a `C x D` weight matrix whose rows are class
//! directions; logits are `logit_scale * W f`. [`AdapterState`] is the
//! residual bottleneck MLP applied to features before the head.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::episodes::ViewSelection;
use crate::error::{Error, Result};
use crate::linalg;
use crate::rng::SplitMix64;
use crate::store::{normalize, normalize_f32, FeatureRecord, FeatureStore, Modality};

pub const DEFAULT_LOGIT_SCALE: f64 = 100.0;
pub const DEFAULT_RESIDUAL_RATIO: f64 = 0.2;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierState {
    pub class_ids: Vec<u32>,
    pub dim: usize,
    /// Row-major `class_ids.len() x dim`.
    pub weights: Vec<f64>,
    pub logit_scale: f64,
}

impl ClassifierState {
    pub fn zeros(class_ids: Vec<u32>, dim: usize, logit_scale: f64) -> Self {
        let weights = vec![0.0; class_ids.len() * dim];
        Self {
            class_ids,
            dim,
            weights,
            logit_scale,
        }
    }

    pub fn from_rows(class_ids: Vec<u32>, rows: &[Vec<f64>], logit_scale: f64) -> Result<Self> {
        if rows.len() != class_ids.len() || rows.is_empty() {
            return Err(Error::ShapeMismatch(format!(
                "{} rows for {} classes",
                rows.len(),
                class_ids.len()
            )));
        }
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::ShapeMismatch("rows differ in length".into()));
        }
        let state = Self {
            class_ids,
            dim,
            weights: rows.concat(),
            logit_scale,
        };
        state.validate()?;
        Ok(state)
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.len() != self.class_ids.len() * self.dim {
            return Err(Error::ShapeMismatch(format!(
                "{} weights for {}x{}",
                self.weights.len(),
                self.class_ids.len(),
                self.dim
            )));
        }
        if !(self.logit_scale > 0.0 && self.logit_scale.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "logit scale must be positive, got {}",
                self.logit_scale
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite classifier weight".into()));
        }
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.weights.chunks_exact(self.dim)
    }

    pub fn index_of(&self, class_id: u32) -> Option<usize> {
        self.class_ids.iter().position(|&c| c == class_id)
    }

    /// Unscaled inner products `W f`.
    pub fn scores(&self, feature: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(feature.len())?;
        let mut out = vec![0.0; self.num_classes()];
        linalg::matvec(&self.weights, feature, &mut out);
        Ok(out)
    }

    /// Row index of the maximal inner product; ties go to the lowest index.
    pub fn predict_index(&self, feature: &[f64]) -> Result<usize> {
        Ok(linalg::argmax(&self.scores(feature)?))
    }

    pub fn predict(&self, feature: &[f64]) -> Result<u32> {
        Ok(self.class_ids[self.predict_index(feature)?])
    }

    fn check_dim(&self, found: usize) -> Result<()> {
        if found != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found,
            });
        }
        Ok(())
    }
}

/// Text-initialized classifier: row `y` is the normalized mean of the
/// normalized text vectors selected for class `y`.
pub fn init_from_text(
    text_store: &FeatureStore,
    class_ids: &[u32],
    policy: &ViewSelection,
) -> Result<ClassifierState> {
    let test_ids = text_store.test_ids();
    let mut rows = Vec::with_capacity(class_ids.len());
    for &class_id in class_ids {
        let mut candidates: Vec<&FeatureRecord> = text_store
            .records
            .iter()
            .filter(|r| {
                r.modality == Modality::Text
                    && r.class_id == class_id
                    && !test_ids.contains(&r.sample_id)
            })
            .collect();
        candidates.sort_by_key(|r| (r.view_id, r.sample_id));
        let chosen: Vec<&FeatureRecord> = match policy {
            ViewSelection::First(k) => candidates.into_iter().take(*k).collect(),
            ViewSelection::All => candidates,
            ViewSelection::Views(ids) => ids
                .iter()
                .filter_map(|v| candidates.iter().find(|r| r.view_id == *v).copied())
                .collect(),
        };
        let expected = match policy {
            ViewSelection::Views(ids) => ids.len(),
            _ => 1,
        };
        if chosen.is_empty() || chosen.len() < expected {
            return Err(Error::MissingClassText(class_id));
        }
        let mut mean = vec![0.0; text_store.dimension];
        for r in &chosen {
            linalg::axpy(1.0, &normalize_f32(&r.vector)?, &mut mean);
        }
        let n = chosen.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        rows.push(normalize(&mean).map_err(|_| Error::MissingClassText(class_id))?);
    }
    ClassifierState::from_rows(class_ids.to_vec(), &rows, DEFAULT_LOGIT_SCALE)
}

/// Post-hoc weight-space ensemble: `alpha * zeroshot + (1 - alpha) * learned`.
pub fn wise_ft(learned: &ClassifierState, zeroshot: &ClassifierState, alpha: f64) -> Result<ClassifierState> {
    if learned.dim != zeroshot.dim || learned.num_classes() != zeroshot.num_classes() {
        return Err(Error::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            learned.num_classes(),
            learned.dim,
            zeroshot.num_classes(),
            zeroshot.dim
        )));
    }
    if learned.class_ids != zeroshot.class_ids {
        return Err(Error::ClassOrderMismatch);
    }
    if learned.logit_scale != zeroshot.logit_scale {
        return Err(Error::ShapeMismatch(format!(
            "logit scales differ ({} vs {})",
            learned.logit_scale, zeroshot.logit_scale
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidConfig(format!("alpha {alpha} outside [0, 1]")));
    }
    // Endpoints are returned as-is so signed zeros survive bit-for-bit.
    if alpha == 0.0 {
        return Ok(learned.clone());
    }
    if alpha == 1.0 {
        return Ok(zeroshot.clone());
    }
    let weights = learned
        .weights
        .iter()
        .zip(&zeroshot.weights)
        .map(|(l, z)| alpha * z + (1.0 - alpha) * l)
        .collect();
    Ok(ClassifierState {
        weights,
        ..learned.clone()
    })
}

/// How much of each class's weight change lies outside the span of the training features.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepresenterAnalysis {
    /// `||P_perp (w_y - w_y_init)||` per class.
    pub residuals: Vec<f64>,
    /// `||w_y - w_y_init||` per class.
    pub delta_norms: Vec<f64>,
    /// Minimum-norm least-squares coefficients `alpha_iy` with
    /// `w_y - w_y_init ~ sum_i alpha_iy f_i`; one vector of length N per class.
    pub coefficients: Vec<Vec<f64>>,
}

impl RepresenterAnalysis {
    pub fn relative_residuals(&self) -> Vec<f64> {
        self.residuals
            .iter()
            .zip(&self.delta_norms)
            .map(|(r, d)| if *d == 0.0 { 0.0 } else { r / d })
            .collect()
    }
}

/// Decompose `trained - init` against the span of `train_features` via thin SVD.
pub fn representer_residual(
    trained: &ClassifierState,
    init: &ClassifierState,
    train_features: &[Vec<f64>],
) -> Result<RepresenterAnalysis> {
    if trained.dim != init.dim || trained.num_classes() != init.num_classes() {
        return Err(Error::ShapeMismatch("trained and init differ in shape".into()));
    }
    if train_features.is_empty() {
        return Err(Error::ShapeMismatch("no training features".into()));
    }
    let d = trained.dim;
    if let Some(f) = train_features.iter().find(|f| f.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: f.len(),
        });
    }
    let n = train_features.len();
    let features = DMatrix::from_fn(d, n, |row, col| train_features[col][row]);
    let svd = features.svd(true, true);
    let sigma_max = svd.singular_values.max();
    let tol = sigma_max * (d.max(n) as f64) * f64::EPSILON;
    let u = svd.u.as_ref().expect("u requested");
    let rank_cols: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > tol)
        .collect();

    let mut residuals = Vec::with_capacity(trained.num_classes());
    let mut delta_norms = Vec::with_capacity(trained.num_classes());
    let mut coefficients = Vec::with_capacity(trained.num_classes());
    for (w, w0) in trained.rows().zip(init.rows()) {
        let delta = DVector::from_iterator(d, w.iter().zip(w0).map(|(a, b)| a - b));
        let mut projected = DVector::zeros(d);
        for &i in &rank_cols {
            let ui = u.column(i);
            projected += ui * ui.dot(&delta);
        }
        residuals.push((&delta - projected).norm());
        delta_norms.push(delta.norm());
        let alpha = svd
            .solve(&delta, tol)
            .map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        coefficients.push(alpha.iter().copied().collect());
    }
    Ok(RepresenterAnalysis {
        residuals,
        delta_norms,
        coefficients,
    })
}

/// Residual bottleneck MLP:
/// `out = normalize(rho * relu(W2 relu(W1 f + b1) + b2) + (1 - rho) * f)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterState {
    pub dim: usize,
    pub hidden: usize,
    /// Row-major `hidden x dim`.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Row-major `dim x hidden`.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub residual_ratio: f64,
}

/// Hidden width for input dimension `dim`: a quarter, rounded up.
pub fn adapter_hidden_dim(dim: usize) -> usize {
    dim.div_ceil(4)
}

/// Intermediate values of one adapter forward pass, kept for backprop.
#[derive(Debug, Clone)]
pub struct AdapterTrace {
    pub hidden_pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub out_pre: Vec<f64>,
    /// Residual sum before normalization.
    pub mixed: Vec<f64>,
    pub mixed_norm: f64,
    pub output: Vec<f64>,
}

impl AdapterState {
    pub fn zeros(dim: usize, residual_ratio: f64) -> Self {
        let hidden = adapter_hidden_dim(dim);
        Self {
            dim,
            hidden,
            w1: vec![0.0; hidden * dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; dim * hidden],
            b2: vec![0.0; dim],
            residual_ratio,
        }
    }

    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
    pub fn random(dim: usize, residual_ratio: f64, seed: u64) -> Self {
        let mut a = Self::zeros(dim, residual_ratio);
        let mut rng = SplitMix64::derive(seed, 0xADA9);
        let b1 = 1.0 / (dim as f64).sqrt();
        let b2 = 1.0 / (a.hidden as f64).sqrt();
        a.w1.iter_mut().for_each(|w| *w = rng.uniform(-b1, b1));
        a.b1.iter_mut().for_each(|w| *w = rng.uniform(-b1, b1));
        a.w2.iter_mut().for_each(|w| *w = rng.uniform(-b2, b2));
        a.b2.iter_mut().for_each(|w| *w = rng.uniform(-b2, b2));
        a
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.hidden == adapter_hidden_dim(self.dim)
            && self.w1.len() == self.hidden * self.dim
            && self.b1.len() == self.hidden
            && self.w2.len() == self.dim * self.hidden
            && self.b2.len() == self.dim;
        if !ok {
            return Err(Error::ShapeMismatch("adapter parameter shapes".into()));
        }
        if !(0.0..=1.0).contains(&self.residual_ratio) {
            return Err(Error::InvalidConfig(format!(
                "residual ratio {} outside [0, 1]",
                self.residual_ratio
            )));
        }
        let all = self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2);
        if all.copied().any(|v| !v.is_finite()) {
            return Err(Error::ShapeMismatch("non-finite adapter parameter".into()));
        }
        Ok(())
    }

    pub fn trace(&self, feature: &[f64]) -> Result<AdapterTrace> {
        if feature.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: feature.len(),
            });
        }
        let mut hidden_pre = vec![0.0; self.hidden];
        linalg::matvec(&self.w1, feature, &mut hidden_pre);
        linalg::axpy(1.0, &self.b1, &mut hidden_pre);
        let hidden: Vec<f64> = hidden_pre.iter().map(|&v| v.max(0.0)).collect();
        let mut out_pre = vec![0.0; self.dim];
        linalg::matvec(&self.w2, &hidden, &mut out_pre);
        linalg::axpy(1.0, &self.b2, &mut out_pre);
        let rho = self.residual_ratio;
        let mixed: Vec<f64> = out_pre
            .iter()
            .zip(feature)
            .map(|(&o, &f)| rho * o.max(0.0) + (1.0 - rho) * f)
            .collect();
        let mixed_norm = linalg::norm(&mixed);
        let output = normalize(&mixed)?;
        Ok(AdapterTrace {
            hidden_pre,
            hidden,
            out_pre,
            mixed,
            mixed_norm,
            output,
        })
    }

    /// Adapted, re-normalized feature.
    pub fn forward(&self, feature: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(feature)?.output)
    }
}

/// Apply the optional adapter to a feature.
pub fn adapt(adapter: Option<&AdapterState>, feature: &[f64]) -> Result<Vec<f64>> {
    match adapter {
        Some(a) => a.forward(feature),
        None => Ok(feature.to_vec()),
    }
}

const CHECKPOINT_MAGIC: [u8; 4] = *b"XMCK";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub class_ids: Vec<u32>,
    pub dimension: usize,
    pub logit_scale: f64,
    #[serde(default)]
    pub adapter: Option<AdapterHeader>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdapterHeader {
    pub hidden: usize,
    pub residual_ratio: f64,
}

/// `model.ckpt` -> `model.ckpt.json`
pub fn checkpoint_header_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".json");
    path.with_file_name(name)
}

/// Binary body: magic `XMCK`, version u32, classes u32, dimension u32,
/// adapter flag u8, hidden u32, then the classifier weights and (if present)
/// `w1 · b1 · w2 · b2`, all f64 little-endian.
pub fn encode_checkpoint(classifier: &ClassifierState, adapter: Option<&AdapterState>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(classifier.num_classes() as u32).to_le_bytes());
    out.extend_from_slice(&(classifier.dim as u32).to_le_bytes());
    out.push(u8::from(adapter.is_some()));
    out.extend_from_slice(&(adapter.map_or(0, |a| a.hidden) as u32).to_le_bytes());
    let mut put = |xs: &[f64]| xs.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes()));
    put(&classifier.weights);
    if let Some(a) = adapter {
        put(&a.w1);
        put(&a.b1);
        put(&a.w2);
        put(&a.b2);
    }
    out
}

pub fn write_checkpoint(
    path: &Path,
    classifier: &ClassifierState,
    adapter: Option<&AdapterState>,
) -> Result<()> {
    fs::write(path, encode_checkpoint(classifier, adapter)).map_err(|e| Error::io(path, e))?;
    let header = CheckpointHeader {
        version: CHECKPOINT_VERSION,
        class_ids: classifier.class_ids.clone(),
        dimension: classifier.dim,
        logit_scale: classifier.logit_scale,
        adapter: adapter.map(|a| AdapterHeader {
            hidden: a.hidden,
            residual_ratio: a.residual_ratio,
        }),
    };
    let header_path = checkpoint_header_path(path);
    let mut json = serde_json::to_string_pretty(&header).map_err(|e| Error::json(&header_path, e))?;
    json.push('\n');
    fs::write(&header_path, json).map_err(|e| Error::io(&header_path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<(ClassifierState, Option<AdapterState>)> {
    let header_path = checkpoint_header_path(path);
    let text = fs::read_to_string(&header_path).map_err(|e| Error::io(&header_path, e))?;
    let header: CheckpointHeader =
        serde_json::from_str(&text).map_err(|e| Error::json(&header_path, e))?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, &header)
}

pub fn decode_checkpoint(
    bytes: &[u8],
    header: &CheckpointHeader,
) -> Result<(ClassifierState, Option<AdapterState>)> {
    let bad = |m: &str| Error::BadCheckpoint(m.to_string());
    if bytes.len() < 21 || bytes[..4] != CHECKPOINT_MAGIC {
        return Err(bad("missing XMCK magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    if u32_at(4) != CHECKPOINT_VERSION as usize {
        return Err(bad("unsupported checkpoint version"));
    }
    let (classes, dim, has_adapter, hidden) = (u32_at(8), u32_at(12), bytes[16] == 1, u32_at(17));
    if classes != header.class_ids.len() || dim != header.dimension {
        return Err(bad("header and body disagree on shape"));
    }
    if has_adapter != header.adapter.is_some() {
        return Err(bad("header and body disagree on adapter presence"));
    }
    let mut floats = bytes[21..]
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()));
    let expected = classes * dim + if has_adapter { 2 * hidden * dim + hidden + dim } else { 0 };
    if bytes.len() - 21 != expected * 8 {
        return Err(bad("body length does not match shape"));
    }
    let mut take = |n: usize| -> Vec<f64> { floats.by_ref().take(n).collect() };
    let classifier = ClassifierState {
        class_ids: header.class_ids.clone(),
        dim,
        weights: take(classes * dim),
        logit_scale: header.logit_scale,
    };
    classifier.validate()?;
    let adapter = match &header.adapter {
        Some(h) => {
            let a = AdapterState {
                dim,
                hidden,
                w1: take(hidden * dim),
                b1: take(hidden),
                w2: take(dim * hidden),
                b2: take(dim),
                residual_ratio: h.residual_ratio,
            };
            if h.hidden != hidden {
                return Err(bad("hidden width mismatch"));
            }
            a.validate()?;
            Some(a)
        }
        None => None,
    };
    Ok((classifier, adapter))
}
