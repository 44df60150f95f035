//! Synthetic multimodal benchmarks with known structure.
//!
//! Every class has a mean direction on the unit sphere. A record of modality
//! `m` for class `c` is `normalize(mean_c + offset_m + noise)`, where
//! `offset_m` is shared by all classes of that modality (the modality gap)
//! and the noise is isotropic Gaussian with expected norm given by the config.
//! Text records carry one view per template; template `t` has its own noise
//! level, so template quality is controlled. Image records carry extra views
//! (jittered copies of the canonical view) and a flagged test partition.
//! Audio records are assigned round-robin to five folds.
//!
//! All randomness derives from [`SynthConfig::seed`], [`DEFAULT_SEED`] by default.

use std::collections::BTreeMap;
use std::path::Path;

use crate::augment::TemplatePool;
use crate::episodes::{EscMatching, EscVariant, ESC_FOLDS};
use crate::error::Result;
use crate::linalg;
use crate::rng::SplitMix64;
use crate::store::{normalize, write_store, FeatureRecord, FeatureStore, Manifest, Modality};

pub const DEFAULT_SEED: u64 = 20_240_417;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub classes: usize,
    pub dim: usize,
    /// Non-test image samples per class (train and val candidates).
    pub image_pool: usize,
    pub image_test: usize,
    /// Extra image views per sample (view ids `1..=image_views`).
    pub image_views: u16,
    pub templates: usize,
    pub audio_per_fold: usize,
    /// Expected norm of the per-record noise.
    pub image_noise: f64,
    pub view_noise: f64,
    pub audio_noise: f64,
    /// Noise of template `t` is drawn uniformly from this range.
    pub text_noise: (f64, f64),
    pub modality_offset: f64,
    pub class_names: Option<Vec<String>>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            classes: 10,
            dim: 64,
            image_pool: 24,
            image_test: 30,
            image_views: 10,
            templates: 180,
            audio_per_fold: 8,
            image_noise: 1.6,
            view_noise: 0.4,
            audio_noise: 1.6,
            text_noise: (0.3, 2.5),
            modality_offset: 0.5,
            class_names: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthBenchmark {
    pub image: FeatureStore,
    pub text: FeatureStore,
    pub audio: FeatureStore,
    pub class_means: Vec<Vec<f64>>,
    /// Noise norm of each template (lower is better).
    pub template_noise: Vec<f64>,
}

const IMAGE_BASE: u32 = 0;
const TEXT_BASE: u32 = 1 << 28;
const AUDIO_BASE: u32 = 2 << 28;

struct Draw {
    dim: usize,
}

impl Draw {
    fn gaussian(&self, rng: &mut SplitMix64, norm: f64) -> Vec<f64> {
        let scale = norm / (self.dim as f64).sqrt();
        (0..self.dim).map(|_| scale * rng.gaussian()).collect()
    }

    fn direction(&self, rng: &mut SplitMix64) -> Vec<f64> {
        loop {
            if let Ok(v) = normalize(&self.gaussian(rng, 1.0)) {
                return v;
            }
        }
    }

    fn record(
        &self,
        base: &[f64],
        noise: f64,
        rng: &mut SplitMix64,
        ids: (u32, u32, Modality, u16),
    ) -> Result<FeatureRecord> {
        let mut v = base.to_vec();
        linalg::axpy(1.0, &self.gaussian(rng, noise), &mut v);
        let (sample_id, class_id, modality, view_id) = ids;
        Ok(FeatureRecord {
            sample_id,
            class_id,
            modality,
            view_id,
            vector: normalize(&v)?.into_iter().map(|x| x as f32).collect(),
        })
    }
}

fn stream(kind: u64, index: u64) -> u64 {
    (kind << 40) | index
}

impl SynthBenchmark {
    pub fn generate(config: &SynthConfig) -> Result<Self> {
        let draw = Draw { dim: config.dim };
        let seed = config.seed;
        let names: Vec<String> = match &config.class_names {
            Some(n) => n.clone(),
            None => (0..config.classes).map(|c| format!("class_{c:02}")).collect(),
        };
        let classes: BTreeMap<u32, String> = names.iter().cloned().enumerate().map(|(i, n)| (i as u32, n)).collect();

        let mut rng = SplitMix64::derive(seed, stream(1, 0));
        let class_means: Vec<Vec<f64>> = (0..names.len()).map(|_| draw.direction(&mut rng)).collect();
        let mut rng = SplitMix64::derive(seed, stream(2, 0));
        let offsets: BTreeMap<Modality, Vec<f64>> = Modality::ALL
            .iter()
            .map(|&m| {
                let mut o = draw.direction(&mut rng);
                o.iter_mut().for_each(|x| *x *= config.modality_offset);
                (m, o)
            })
            .collect();
        let mut rng = SplitMix64::derive(seed, stream(3, 0));
        let template_noise: Vec<f64> = (0..config.templates)
            .map(|_| rng.uniform(config.text_noise.0, config.text_noise.1))
            .collect();
        let shifted = |c: usize, m: Modality| -> Vec<f64> {
            class_means[c].iter().zip(&offsets[&m]).map(|(a, b)| a + b).collect()
        };

        let mut image = FeatureStore::new(config.dim, manifest("synthetic-image", &classes));
        let mut next = IMAGE_BASE;
        for c in 0..names.len() {
            let mut rng = SplitMix64::derive(seed, stream(4, c as u64));
            let base = shifted(c, Modality::Image);
            for i in 0..config.image_pool + config.image_test {
                let canonical = draw.record(&base, config.image_noise, &mut rng, (next, c as u32, Modality::Image, 0))?;
                let anchor: Vec<f64> = canonical.vector.iter().map(|&x| f64::from(x)).collect();
                let test = i >= config.image_pool;
                image.records.push(canonical);
                if test {
                    image.manifest.test_samples.push(next);
                } else {
                    for v in 1..=config.image_views {
                        image
                            .records
                            .push(draw.record(&anchor, config.view_noise, &mut rng, (next, c as u32, Modality::Image, v))?);
                    }
                }
                next += 1;
            }
        }

        let pool = TemplatePool::mined_pool();
        let mut text = FeatureStore::new(config.dim, manifest("synthetic-text", &classes));
        text.manifest.templates = Some(
            (0..config.templates)
                .map(|t| pool.templates.get(t).cloned().unwrap_or_else(|| format!("{{cls}} ({t})")))
                .collect(),
        );
        let mut next = TEXT_BASE;
        for c in 0..names.len() {
            let mut rng = SplitMix64::derive(seed, stream(5, c as u64));
            let base = shifted(c, Modality::Text);
            for (t, &noise) in template_noise.iter().enumerate() {
                text.records
                    .push(draw.record(&base, noise, &mut rng, (next, c as u32, Modality::Text, t as u16))?);
                next += 1;
            }
        }

        let mut audio = FeatureStore::new(config.dim, manifest("synthetic-audio", &classes));
        let mut next = AUDIO_BASE;
        for c in 0..names.len() {
            let mut rng = SplitMix64::derive(seed, stream(6, c as u64));
            let base = shifted(c, Modality::Audio);
            for fold in 1..=ESC_FOLDS {
                for _ in 0..config.audio_per_fold {
                    audio
                        .records
                        .push(draw.record(&base, config.audio_noise, &mut rng, (next, c as u32, Modality::Audio, 0))?);
                    audio.manifest.folds.insert(next, fold);
                    next += 1;
                }
            }
        }

        for s in [&image, &text, &audio] {
            s.validate()?;
        }
        Ok(Self {
            image,
            text,
            audio,
            class_means,
            template_noise,
        })
    }

    /// Paired image and audio stores whose class names follow an ESC matching.
    /// Both stores share one set of class means, indexed by pair.
    pub fn generate_esc(config: &SynthConfig, variant: EscVariant) -> Result<Self> {
        let matching = EscMatching::builtin(variant);
        let imagenet: Vec<String> = matching.pairs.iter().map(|(_, i)| i.clone()).collect();
        let esc: Vec<String> = matching.pairs.iter().map(|(e, _)| e.clone()).collect();
        let mut out = Self::generate(&SynthConfig {
            class_names: Some(imagenet),
            classes: matching.pairs.len(),
            ..config.clone()
        })?;
        out.audio.manifest.classes = esc.into_iter().enumerate().map(|(i, n)| (i as u32, n)).collect();
        out.audio.manifest.dataset = "synthetic-esc".into();
        out.image.manifest.dataset = "synthetic-imagenet".into();
        Ok(out)
    }

    /// Write `image.xmf`, `text.xmf` and `audio.xmf` (plus manifests) into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
        write_store(&self.image, dir.join("image.xmf"))?;
        write_store(&self.text, dir.join("text.xmf"))?;
        write_store(&self.audio, dir.join("audio.xmf"))
    }
}

fn manifest(dataset: &str, classes: &BTreeMap<u32, String>) -> Manifest {
    Manifest {
        dataset: dataset.to_string(),
        classes: classes.clone(),
        normalized: true,
        ..Manifest::default()
    }
}
