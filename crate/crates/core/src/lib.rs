#![allow(clippy::neg_cmp_op_on_partial_ord)]
//! Cross-modal few-shot adaptation over precomputed embeddings.
//!
//! Text labels, image crops and audio clips that live in one shared embedding
//! space are all treated as training shots for a single temperature-scaled
//! linear classifier (optionally preceded by a residual bottleneck adapter).
//!
//! Features come from XMFS stores ([`store`]), episodes are sampled
//! deterministically ([`episodes`]), heads live in [`models`], the training
//! loop with warmup/cosine scheduling and validation early stopping lives in
//! [`trainer`], and [`eval`] covers metrics, distribution-shift evaluation,
//! PCA figures and result tables.

pub mod augment;
pub mod episodes;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod models;
pub mod par;
pub mod rng;
pub mod store;
pub mod synth;
pub mod trainer;

pub use error::{Error, Result};
pub use store::{FeatureRecord, FeatureStore, Manifest, Modality, RecordKey, Sample};
