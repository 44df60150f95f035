//! XMFS feature stores: modality-tagged, class-labelled embedding vectors.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! | field        | type      |
//! |--------------|-----------|
//! | magic        | `b"XMFS"` |
//! | version      | u32 = 1   |
//! | dimension    | u32       |
//! | record_count | u64       |
//!
//! followed by `record_count` records of
//! `sample_id u32 · modality u8 · view_id u16 · class_id u32 · dimension × f32`.
//!
//! Class names, the dataset name and the optional template list live in a
//! sibling `<name>.manifest.json` so they can be edited by hand.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"XMFS";
pub const FORMAT_VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;
const RECORD_PREFIX_LEN: usize = 4 + 1 + 2 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Image = 0,
    Text = 1,
    Audio = 2,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Image, Modality::Text, Modality::Audio];

    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Modality::Image),
            1 => Some(Modality::Text),
            2 => Some(Modality::Audio),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Image => "image",
            Modality::Text => "text",
            Modality::Audio => "audio",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Modality {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "image" => Ok(Modality::Image),
            "text" => Ok(Modality::Text),
            "audio" => Ok(Modality::Audio),
            other => Err(format!("unknown modality {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub sample_id: u32,
    pub class_id: u32,
    pub modality: Modality,
    /// 0 is the canonical view; higher ids are augmented views or template indices.
    pub view_id: u16,
    pub vector: Vec<f32>,
}

/// Identity of a record inside one store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RecordKey {
    pub class_id: u32,
    pub modality: Modality,
    pub sample_id: u32,
    pub view_id: u16,
}

impl FeatureRecord {
    pub fn key(&self) -> RecordKey {
        RecordKey {
            class_id: self.class_id,
            modality: self.modality,
            sample_id: self.sample_id,
            view_id: self.view_id,
        }
    }

    /// The record as a training/evaluation sample with an L2-normalized f64 feature.
    pub fn to_sample(&self) -> Result<Sample> {
        Ok(Sample {
            sample_id: self.sample_id,
            class_id: self.class_id,
            modality: self.modality,
            view_id: self.view_id,
            feature: normalize_f32(&self.vector)?,
        })
    }
}

/// A normalized, labelled feature ready for training or evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub sample_id: u32,
    pub class_id: u32,
    pub modality: Modality,
    pub view_id: u16,
    pub feature: Vec<f64>,
}

impl Sample {
    /// A bare labelled feature (sample and view ids zero), used mostly by tests and synthetic data.
    pub fn new(class_id: u32, modality: Modality, feature: Vec<f64>) -> Self {
        Self {
            sample_id: 0,
            class_id,
            modality,
            view_id: 0,
            feature,
        }
    }

    pub fn key(&self) -> RecordKey {
        RecordKey {
            class_id: self.class_id,
            modality: self.modality,
            sample_id: self.sample_id,
            view_id: self.view_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub dataset: String,
    pub classes: BTreeMap<u32, String>,
    /// Whether the exporter already L2-normalized the vectors. Loading normalizes regardless.
    pub normalized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub templates: Option<Vec<String>>,
    /// sample_id -> ESC-style fold number (1..=5).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub folds: BTreeMap<u32, u8>,
    /// sample_ids that belong to the held-out test partition.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub test_samples: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureStore {
    pub dimension: usize,
    pub records: Vec<FeatureRecord>,
    pub manifest: Manifest,
}

impl FeatureStore {
    pub fn new(dimension: usize, manifest: Manifest) -> Self {
        Self {
            dimension,
            records: Vec::new(),
            manifest,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 || self.dimension > u32::MAX as usize {
            return Err(Error::CorruptRecord(format!(
                "dimension {} out of range",
                self.dimension
            )));
        }
        let mut seen = HashSet::with_capacity(self.records.len());
        for r in &self.records {
            if r.vector.len() != self.dimension {
                return Err(Error::DimensionMismatch {
                    expected: self.dimension,
                    found: r.vector.len(),
                });
            }
            if r.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue {
                    sample_id: r.sample_id,
                    class_id: r.class_id,
                });
            }
            if !seen.insert(r.key()) {
                return Err(Error::DuplicateRecord {
                    class_id: r.class_id,
                    modality: r.modality,
                    sample_id: r.sample_id,
                    view_id: r.view_id,
                });
            }
            if !self.manifest.classes.contains_key(&r.class_id) {
                return Err(Error::MissingClassName(r.class_id));
            }
        }
        Ok(())
    }

    pub fn class_name(&self, class_id: u32) -> Option<&str> {
        self.manifest.classes.get(&class_id).map(String::as_str)
    }

    pub fn class_by_name(&self, name: &str) -> Option<u32> {
        self.manifest
            .classes
            .iter()
            .find(|(_, n)| n.as_str() == name)
            .map(|(id, _)| *id)
    }

    /// Distinct class ids present in records of `modality`, ascending.
    pub fn class_ids(&self, modality: Modality) -> Vec<u32> {
        let mut ids: Vec<u32> = self
            .records
            .iter()
            .filter(|r| r.modality == modality)
            .map(|r| r.class_id)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn modalities(&self) -> Vec<Modality> {
        Modality::ALL
            .into_iter()
            .filter(|m| self.records.iter().any(|r| r.modality == *m))
            .collect()
    }

    pub fn test_ids(&self) -> HashSet<u32> {
        self.manifest.test_samples.iter().copied().collect()
    }

    pub fn find(&self, key: RecordKey) -> Option<&FeatureRecord> {
        self.records.iter().find(|r| r.key() == key)
    }

    /// Canonical-view records usable for evaluation: the flagged test partition
    /// if the manifest has one, otherwise every canonical record.
    pub fn evaluation_samples(&self, modality: Modality) -> Result<Vec<Sample>> {
        let test = self.test_ids();
        self.records
            .iter()
            .filter(|r| r.modality == modality && r.view_id == 0)
            .filter(|r| test.is_empty() || test.contains(&r.sample_id))
            .map(FeatureRecord::to_sample)
            .collect()
    }
}

/// Manifest path that sits next to a store file: `dir/name.xmf` -> `dir/name.manifest.json`.
pub fn manifest_path(store_path: &Path) -> PathBuf {
    let stem = store_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    store_path.with_file_name(format!("{stem}.manifest.json"))
}

/// L2-normalize; norm computed with max-abs scaling so tiny vectors do not underflow.
pub fn normalize(vector: &[f64]) -> Result<Vec<f64>> {
    let scale = vector.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::ZeroVector);
    }
    let norm = scale * vector.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(vector.iter().map(|v| v / norm).collect())
}

pub fn normalize_f32(vector: &[f32]) -> Result<Vec<f64>> {
    let wide: Vec<f64> = vector.iter().map(|&v| f64::from(v)).collect();
    normalize(&wide)
}

pub fn encode_store(store: &FeatureStore) -> Result<Vec<u8>> {
    store.validate()?;
    let d = store.dimension;
    let mut out = Vec::with_capacity(HEADER_LEN + store.records.len() * (RECORD_PREFIX_LEN + 4 * d));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&(store.records.len() as u64).to_le_bytes());
    for r in &store.records {
        out.extend_from_slice(&r.sample_id.to_le_bytes());
        out.push(r.modality as u8);
        out.extend_from_slice(&r.view_id.to_le_bytes());
        out.extend_from_slice(&r.class_id.to_le_bytes());
        for v in &r.vector {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Parse and check the binary body. The manifest is attached separately.
pub fn decode_store(bytes: &[u8], manifest: Manifest) -> Result<FeatureStore> {
    let (dimension, records) = decode_records(bytes)?;
    let store = FeatureStore {
        dimension,
        records,
        manifest,
    };
    store.validate()?;
    Ok(store)
}

fn decode_records(bytes: &[u8]) -> Result<(usize, Vec<FeatureRecord>)> {
    if bytes.len() < 4 || bytes[..4] != MAGIC {
        let mut found = [0u8; 4];
        for (dst, src) in found.iter_mut().zip(bytes) {
            *dst = *src;
        }
        return Err(Error::BadMagic { found });
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::CorruptRecord(format!(
            "header truncated at {} bytes",
            bytes.len()
        )));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let dimension = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    if dimension == 0 {
        return Err(Error::CorruptRecord("dimension is zero".into()));
    }
    let record_len = RECORD_PREFIX_LEN + 4 * dimension;
    let body = &bytes[HEADER_LEN..];
    let expected = (count as u128) * (record_len as u128);
    if expected != body.len() as u128 {
        return Err(Error::CorruptRecord(format!(
            "header declares {count} records of {record_len} bytes but body has {} bytes",
            body.len()
        )));
    }

    let mut records = Vec::with_capacity(count as usize);
    for chunk in body.chunks_exact(record_len) {
        let sample_id = u32::from_le_bytes(chunk[0..4].try_into().unwrap());
        let modality = Modality::from_byte(chunk[4]).ok_or_else(|| {
            Error::CorruptRecord(format!("unknown modality byte {} (sample {sample_id})", chunk[4]))
        })?;
        let view_id = u16::from_le_bytes(chunk[5..7].try_into().unwrap());
        let class_id = u32::from_le_bytes(chunk[7..11].try_into().unwrap());
        let vector: Vec<f32> = chunk[RECORD_PREFIX_LEN..]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { sample_id, class_id });
        }
        records.push(FeatureRecord {
            sample_id,
            class_id,
            modality,
            view_id,
            vector,
        });
    }
    Ok((dimension, records))
}

pub fn write_store(store: &FeatureStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_store(store)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
    write_manifest(&store.manifest, &manifest_path(path))
}

pub fn write_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let mut json = serde_json::to_string_pretty(manifest).map_err(|e| Error::json(path, e))?;
    json.push('\n');
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    manifest.test_samples.sort_unstable();
    manifest.test_samples.dedup();
    Ok(manifest)
}

pub fn read_store(path: impl AsRef<Path>) -> Result<FeatureStore> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (dimension, records) = decode_records(&bytes)?;
    let store = FeatureStore {
        dimension,
        records,
        manifest: read_manifest(&manifest_path(path))?,
    };
    store.validate()?;
    Ok(store)
}
