//! Few-shot episodes: seeded train/val/test partitions over feature stores.
//!
//! Sampling is per class without replacement. Candidates of a class are
//! sorted by `sample_id` and shuffled with a [`SplitMix64`] stream derived from
//! `(seed, class_id)`, so an episode depends only on the store contents, the
//! shot count and the seed. The validation set holds `min(n, 4)` samples per
//! class.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::store::{FeatureRecord, FeatureStore, Modality, RecordKey, Sample};

/// Validation samples per class for `shots` training samples.
pub fn val_size(shots: usize) -> usize {
    shots.min(4)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSplit {
    pub shots: usize,
    pub seed: u64,
    pub modality: Modality,
    pub class_ids: Vec<u32>,
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

/// Serializable identity of an episode (sample keys only, no vectors).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub shots: usize,
    pub seed: u64,
    pub modality: Modality,
    pub class_ids: Vec<u32>,
    pub train: Vec<RecordKey>,
    pub val: Vec<RecordKey>,
    pub test: Vec<RecordKey>,
}

impl EpisodeSplit {
    pub fn summary(&self) -> EpisodeSummary {
        let keys = |xs: &[Sample]| xs.iter().map(Sample::key).collect();
        EpisodeSummary {
            shots: self.shots,
            seed: self.seed,
            modality: self.modality,
            class_ids: self.class_ids.clone(),
            train: keys(&self.train),
            val: keys(&self.val),
            test: keys(&self.test),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary()).expect("episode summary serializes")
    }

    /// Train/val disjoint, and both disjoint from test, by `(sample_id, modality, view_id)`.
    pub fn is_disjoint(&self) -> bool {
        let id = |s: &Sample| (s.sample_id, s.modality, s.view_id);
        let train: HashSet<_> = self.train.iter().map(id).collect();
        let val: HashSet<_> = self.val.iter().map(id).collect();
        let test: HashSet<_> = self.test.iter().map(id).collect();
        train.is_disjoint(&val) && train.is_disjoint(&test) && val.is_disjoint(&test)
    }

    /// Replace the test partition with the canonical records of `test_store`
    /// that belong to this episode's classes.
    pub fn with_test_store(mut self, test_store: &FeatureStore) -> Result<Self> {
        let classes: HashSet<u32> = self.class_ids.iter().copied().collect();
        self.test = test_store
            .evaluation_samples(self.modality)?
            .into_iter()
            .filter(|s| classes.contains(&s.class_id))
            .collect();
        Ok(self)
    }
}

/// Seeded episode over every class that has `modality` records in `store`.
pub fn sample_episode(
    store: &FeatureStore,
    shots: usize,
    seed: u64,
    modality: Modality,
) -> Result<EpisodeSplit> {
    let classes = store.class_ids(modality);
    sample_episode_for(store, &classes, shots, seed, modality)
}

/// Seeded episode restricted to `class_ids` (processed in ascending order).
pub fn sample_episode_for(
    store: &FeatureStore,
    class_ids: &[u32],
    shots: usize,
    seed: u64,
    modality: Modality,
) -> Result<EpisodeSplit> {
    if shots == 0 {
        return Err(Error::InvalidConfig("shots must be positive".into()));
    }
    let test_ids = store.test_ids();
    let mut classes = class_ids.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let wanted: BTreeSet<u32> = classes.iter().copied().collect();

    let mut pools: BTreeMap<u32, Vec<&FeatureRecord>> =
        classes.iter().map(|&c| (c, Vec::new())).collect();
    let mut test = Vec::new();
    for r in &store.records {
        if r.modality != modality || r.view_id != 0 || !wanted.contains(&r.class_id) {
            continue;
        }
        if test_ids.contains(&r.sample_id) {
            test.push(r.to_sample()?);
        } else {
            pools.get_mut(&r.class_id).expect("class in pool map").push(r);
        }
    }

    let n_val = val_size(shots);
    let mut train = Vec::with_capacity(classes.len() * shots);
    let mut val = Vec::with_capacity(classes.len() * n_val);
    for (&class_id, pool) in pools.iter_mut() {
        if pool.len() < shots + n_val {
            return Err(Error::InsufficientSamples {
                class_id,
                available: pool.len(),
                required: shots + n_val,
            });
        }
        pool.sort_by_key(|r| r.sample_id);
        SplitMix64::derive(seed, u64::from(class_id)).shuffle(pool);
        for r in &pool[..shots] {
            train.push(r.to_sample()?);
        }
        for r in &pool[shots..shots + n_val] {
            val.push(r.to_sample()?);
        }
    }
    test.sort_by_key(Sample::key);

    Ok(EpisodeSplit {
        shots,
        seed,
        modality,
        class_ids: classes,
        train,
        val,
        test,
    })
}

/// Externally supplied split (e.g. published few-shot split files).
///
/// Each list is either flat (`[sample_id, ...]`) or keyed by class id
/// (`{"3": [sample_id, ...]}`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub train: IdList,
    pub val: IdList,
    #[serde(default)]
    pub test: IdList,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum IdList {
    Flat(Vec<u32>),
    PerClass(BTreeMap<String, Vec<u32>>),
}

impl Default for IdList {
    fn default() -> Self {
        IdList::Flat(Vec::new())
    }
}

impl IdList {
    fn is_empty(&self) -> bool {
        match self {
            IdList::Flat(v) => v.is_empty(),
            IdList::PerClass(m) => m.values().all(Vec::is_empty),
        }
    }

    fn resolve(&self, index: &BTreeMap<u32, Vec<&FeatureRecord>>) -> Result<Vec<Sample>> {
        let mut out = Vec::new();
        let mut push = |sample_id: u32, class: Option<u32>| -> Result<()> {
            let hits = index.get(&sample_id).ok_or(Error::UnknownSample(sample_id))?;
            let mut found = false;
            for r in hits.iter().filter(|r| class.is_none_or(|c| r.class_id == c)) {
                out.push(r.to_sample()?);
                found = true;
            }
            if found {
                Ok(())
            } else {
                Err(Error::UnknownSample(sample_id))
            }
        };
        match self {
            IdList::Flat(ids) => {
                for &id in ids {
                    push(id, None)?;
                }
            }
            IdList::PerClass(map) => {
                for (key, ids) in map {
                    let class_id: u32 = key
                        .parse()
                        .map_err(|_| Error::InvalidConfig(format!("split class key {key:?} is not a class id")))?;
                    for &id in ids {
                        push(id, Some(class_id))?;
                    }
                }
            }
        }
        Ok(out)
    }
}

impl SplitManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }
}

/// Episode taken verbatim from a split manifest instead of seeded sampling.
/// An empty test list falls back to the store's flagged test partition.
pub fn episode_from_manifest(
    store: &FeatureStore,
    split: &SplitManifest,
    modality: Modality,
) -> Result<EpisodeSplit> {
    let mut index: BTreeMap<u32, Vec<&FeatureRecord>> = BTreeMap::new();
    for r in store.records.iter().filter(|r| r.modality == modality && r.view_id == 0) {
        index.entry(r.sample_id).or_default().push(r);
    }
    let train = split.train.resolve(&index)?;
    let val = split.val.resolve(&index)?;
    let test = if split.test.is_empty() {
        let ids = store.test_ids();
        store
            .records
            .iter()
            .filter(|r| r.modality == modality && r.view_id == 0 && ids.contains(&r.sample_id))
            .map(FeatureRecord::to_sample)
            .collect::<Result<Vec<_>>>()?
    } else {
        split.test.resolve(&index)?
    };
    let class_ids: Vec<u32> = train
        .iter()
        .map(|s| s.class_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let shots = class_ids
        .iter()
        .map(|c| train.iter().filter(|s| s.class_id == *c).count())
        .min()
        .unwrap_or(0);
    Ok(EpisodeSplit {
        shots,
        seed: 0,
        modality,
        class_ids,
        train,
        val,
        test,
    })
}

/// Which records of an extra modality join the training set, per class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViewSelection {
    /// The first `k` records ordered by `(view_id, sample_id)`.
    First(usize),
    /// One record per listed view id (e.g. mined template indices).
    Views(Vec<u16>),
    All,
}

impl Default for ViewSelection {
    fn default() -> Self {
        ViewSelection::First(1)
    }
}

/// Episode train set plus extra-modality shots: the `(n + k)`-shot cross-modal training set.
///
/// Test-flagged records of the extra stores are never used.
pub fn assemble_crossmodal_trainset(
    episode: &EpisodeSplit,
    extra: &[(&FeatureStore, Modality)],
    views: &BTreeMap<Modality, ViewSelection>,
) -> Result<Vec<Sample>> {
    let mut out = episode.train.clone();
    let default = ViewSelection::default();
    for &(store, modality) in extra {
        let selection = views.get(&modality).unwrap_or(&default);
        let test_ids = store.test_ids();
        let mut by_class: BTreeMap<u32, Vec<&FeatureRecord>> = BTreeMap::new();
        for r in &store.records {
            if r.modality == modality && !test_ids.contains(&r.sample_id) {
                by_class.entry(r.class_id).or_default().push(r);
            }
        }
        for &class_id in &episode.class_ids {
            let missing = Error::MissingClassInModality { class_id, modality };
            let mut candidates = match by_class.remove(&class_id) {
                Some(c) if !c.is_empty() => c,
                _ => return Err(missing),
            };
            candidates.sort_by_key(|r| (r.view_id, r.sample_id));
            let chosen: Vec<&FeatureRecord> = match selection {
                ViewSelection::First(k) => {
                    if candidates.len() < *k {
                        return Err(missing);
                    }
                    candidates.truncate(*k);
                    candidates
                }
                ViewSelection::Views(ids) => {
                    let mut picked = Vec::with_capacity(ids.len());
                    for &v in ids {
                        match candidates.iter().find(|r| r.view_id == v) {
                            Some(r) => picked.push(*r),
                            None => return Err(missing),
                        }
                    }
                    picked
                }
                ViewSelection::All => candidates,
            };
            for r in chosen {
                out.push(r.to_sample()?);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EscVariant {
    #[serde(rename = "19")]
    Esc19,
    #[serde(rename = "27")]
    Esc27,
}

impl EscVariant {
    pub fn name(self) -> &'static str {
        match self {
            EscVariant::Esc19 => "ImageNet-ESC-19",
            EscVariant::Esc27 => "ImageNet-ESC-27",
        }
    }
}

impl std::str::FromStr for EscVariant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "19" | "esc19" | "ESC19" => Ok(EscVariant::Esc19),
            "27" | "esc27" | "ESC27" => Ok(EscVariant::Esc27),
            other => Err(format!("unknown ESC variant {other:?} (use 19 or 27)")),
        }
    }
}

const ESC_MATCHING_CSV: &str = include_str!("../data/esc_matching.csv");

/// ESC-50 sound classes paired with ImageNet object classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EscMatching {
    pub variant: EscVariant,
    /// `(esc_class_name, imagenet_class_name)`; the pair index is the episode label.
    pub pairs: Vec<(String, String)>,
}

impl EscMatching {
    /// The shipped matching table. ESC-27 is ESC-19 plus the loose matches.
    pub fn builtin(variant: EscVariant) -> Self {
        let pairs = ESC_MATCHING_CSV
            .lines()
            .skip(1)
            .filter(|l| !l.trim().is_empty())
            .filter_map(|line| {
                let mut cols = line.split(',');
                let esc = cols.next()?.trim().to_string();
                let imagenet = cols.next()?.trim().to_string();
                let subset = cols.next()?.trim();
                let keep = subset == "19" || variant == EscVariant::Esc27;
                keep.then_some((esc, imagenet))
            })
            .collect();
        Self { variant, pairs }
    }
}

/// One ESC protocol cell: the image episode and the audio episode share
/// labels `0..pairs.len()` (the matching's pair index).
#[derive(Debug, Clone, PartialEq)]
pub struct EscEpisode {
    pub image: EpisodeSplit,
    pub audio: EpisodeSplit,
}

pub const ESC_FOLDS: u8 = 5;

/// Build the image and audio episodes for one `(audio_fold, image_split)` cell.
///
/// Audio: the chosen fold is shuffled per class and halved into a training
/// half and a validation half; the episode takes `n` shots from the first and
/// `min(n, 4)` from the second, and tests on the other four folds. Image: a
/// seeded episode with seed `image_split`, tested on the flagged test
/// partition of the image store.
pub fn build_esc_episode(
    image_store: &FeatureStore,
    audio_store: &FeatureStore,
    matching: &EscMatching,
    audio_fold: u8,
    image_split: u8,
    shots: usize,
) -> Result<EscEpisode> {
    if !(1..=ESC_FOLDS).contains(&audio_fold) || !(1..=ESC_FOLDS).contains(&image_split) {
        return Err(Error::InvalidConfig(format!(
            "audio fold {audio_fold} and image split {image_split} must be in 1..=5"
        )));
    }
    let resolve = |store: &FeatureStore, name: &str| {
        store.class_by_name(name).ok_or_else(|| Error::UnmatchedClass {
            class_name: name.to_string(),
            store: store.manifest.dataset.clone(),
        })
    };
    let mut image_classes = Vec::with_capacity(matching.pairs.len());
    let mut audio_classes = Vec::with_capacity(matching.pairs.len());
    for (esc, imagenet) in &matching.pairs {
        image_classes.push(resolve(image_store, imagenet)?);
        audio_classes.push(resolve(audio_store, esc)?);
    }
    let labels = matching.pairs.len() as u32;

    let mut image = sample_episode_for(
        image_store,
        &image_classes,
        shots,
        u64::from(image_split),
        Modality::Image,
    )?;
    let image_label: BTreeMap<u32, u32> =
        image_classes.iter().enumerate().map(|(i, &c)| (c, i as u32)).collect();
    for s in image.train.iter_mut().chain(&mut image.val).chain(&mut image.test) {
        s.class_id = image_label[&s.class_id];
    }
    image.class_ids = (0..labels).collect();
    image.train.sort_by_key(|s| s.class_id);
    image.val.sort_by_key(|s| s.class_id);
    image.test.sort_by_key(Sample::key);

    let n_val = val_size(shots);
    let mut audio = EpisodeSplit {
        shots,
        seed: u64::from(audio_fold),
        modality: Modality::Audio,
        class_ids: (0..labels).collect(),
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    let folds = &audio_store.manifest.folds;
    for (label, &class_id) in audio_classes.iter().enumerate() {
        let mut in_fold = Vec::new();
        let mut held_out = Vec::new();
        for r in &audio_store.records {
            if r.modality != Modality::Audio || r.view_id != 0 || r.class_id != class_id {
                continue;
            }
            match folds.get(&r.sample_id) {
                Some(&f) if f == audio_fold => in_fold.push(r),
                Some(_) => held_out.push(r),
                None => {}
            }
        }
        if in_fold.is_empty() {
            return Err(Error::MissingFold {
                fold: audio_fold,
                class_id,
            });
        }
        in_fold.sort_by_key(|r| r.sample_id);
        SplitMix64::derive(u64::from(audio_fold), u64::from(class_id)).shuffle(&mut in_fold);
        let (train_half, val_half) = in_fold.split_at(in_fold.len() / 2);
        if train_half.len() < shots || val_half.len() < n_val {
            return Err(Error::InsufficientSamples {
                class_id,
                available: in_fold.len(),
                required: 2 * shots.max(n_val),
            });
        }
        let relabel = |r: &FeatureRecord| -> Result<Sample> {
            let mut s = r.to_sample()?;
            s.class_id = label as u32;
            Ok(s)
        };
        for r in &train_half[..shots] {
            audio.train.push(relabel(r)?);
        }
        for r in &val_half[..n_val] {
            audio.val.push(relabel(r)?);
        }
        held_out.sort_by_key(|r| r.sample_id);
        for r in held_out {
            audio.test.push(relabel(r)?);
        }
    }
    Ok(EscEpisode { image, audio })
}

/// All 25 `(audio_fold, image_split)` combinations in row-major order.
pub fn esc_cells() -> Vec<(u8, u8)> {
    (1..=ESC_FOLDS)
        .flat_map(|a| (1..=ESC_FOLDS).map(move |i| (a, i)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::Manifest;

    fn toy_store(classes: u32, per_class: u32, dim: usize) -> FeatureStore {
        let mut manifest = Manifest {
            dataset: "toy".into(),
            ..Default::default()
        };
        let mut store = FeatureStore::new(dim, Manifest::default());
        let mut sid = 0;
        for c in 0..classes {
            manifest.classes.insert(c, format!("class{c}"));
            for i in 0..per_class {
                let mut v = vec![0.0f32; dim];
                v[c as usize % dim] = 1.0;
                v[(c as usize + 1) % dim] = 0.1 * (i + 1) as f32;
                store.records.push(FeatureRecord {
                    sample_id: sid,
                    class_id: c,
                    modality: Modality::Image,
                    view_id: 0,
                    vector: v,
                });
                sid += 1;
            }
        }
        store.manifest = manifest;
        store
    }

    #[test]
    fn one_shot_counts() {
        let store = toy_store(3, 6, 4);
        let ep = sample_episode(&store, 1, 0, Modality::Image).unwrap();
        assert_eq!(ep.train.len(), 3);
        assert_eq!(ep.val.len(), 3);
        assert!(ep.is_disjoint());
    }

    #[test]
    fn eight_shot_val_is_capped_at_four() {
        let store = toy_store(2, 12, 4);
        let ep = sample_episode(&store, 8, 5, Modality::Image).unwrap();
        assert_eq!(ep.train.len(), 16);
        assert_eq!(ep.val.len(), 8);
        for c in 0..2 {
            assert_eq!(ep.val.iter().filter(|s| s.class_id == c).count(), 4);
        }
    }

    #[test]
    fn same_seed_same_split() {
        let store = toy_store(4, 10, 4);
        let a = sample_episode(&store, 2, 11, Modality::Image).unwrap();
        let b = sample_episode(&store, 2, 11, Modality::Image).unwrap();
        assert_eq!(a.to_json(), b.to_json());
        let c = sample_episode(&store, 2, 12, Modality::Image).unwrap();
        assert_ne!(a.summary().train, c.summary().train);
    }

    #[test]
    fn record_order_does_not_matter() {
        let store = toy_store(3, 8, 4);
        let mut reversed = store.clone();
        reversed.records.reverse();
        let a = sample_episode(&store, 2, 3, Modality::Image).unwrap();
        let b = sample_episode(&reversed, 2, 3, Modality::Image).unwrap();
        assert_eq!(a.summary(), b.summary());
    }

    #[test]
    fn insufficient_samples_names_class() {
        let mut store = toy_store(2, 6, 4);
        store.records.retain(|r| !(r.class_id == 1 && r.sample_id > 8));
        let err = sample_episode(&store, 2, 0, Modality::Image).unwrap_err();
        assert!(matches!(err, Error::InsufficientSamples { class_id: 1, .. }));
    }

    #[test]
    fn test_partition_comes_from_manifest() {
        let mut store = toy_store(2, 8, 4);
        store.manifest.test_samples = vec![0, 1, 8, 9];
        let ep = sample_episode(&store, 2, 0, Modality::Image).unwrap();
        assert_eq!(ep.test.len(), 4);
        assert!(ep.is_disjoint());
    }

    #[test]
    fn split_manifest_overrides_sampling() {
        let store = toy_store(2, 6, 4);
        let json = r#"{"train": {"0": [0], "1": [6]}, "val": [1, 7], "test": [2, 3, 8]}"#;
        let split: SplitManifest = serde_json::from_str(json).unwrap();
        let ep = episode_from_manifest(&store, &split, Modality::Image).unwrap();
        assert_eq!(ep.train.iter().map(|s| s.sample_id).collect::<Vec<_>>(), vec![0, 6]);
        assert_eq!(ep.val.len(), 2);
        assert_eq!(ep.test.len(), 3);
        assert_eq!(ep.shots, 1);

        let bad: SplitManifest = serde_json::from_str(r#"{"train": [999], "val": []}"#).unwrap();
        assert!(matches!(
            episode_from_manifest(&store, &bad, Modality::Image),
            Err(Error::UnknownSample(999))
        ));
    }

    fn text_store(classes: u32, views: u16, dim: usize) -> FeatureStore {
        let mut store = FeatureStore::new(dim, Manifest::default());
        for c in 0..classes {
            store.manifest.classes.insert(c, format!("class{c}"));
            for v in 0..views {
                let mut x = vec![0.0f32; dim];
                x[c as usize % dim] = 1.0;
                x[(c as usize + 2) % dim] = 0.05 * f32::from(v);
                store.records.push(FeatureRecord {
                    sample_id: c * 1000 + u32::from(v),
                    class_id: c,
                    modality: Modality::Text,
                    view_id: v,
                    vector: x,
                });
            }
        }
        store
    }

    #[test]
    fn crossmodal_two_shots_plus_text_is_three_per_class() {
        let images = toy_store(2, 8, 4);
        let texts = text_store(2, 3, 4);
        let ep = sample_episode(&images, 2, 0, Modality::Image).unwrap();
        let set =
            assemble_crossmodal_trainset(&ep, &[(&texts, Modality::Text)], &BTreeMap::new()).unwrap();
        assert_eq!(set.len(), 6);
        assert_eq!(set.iter().filter(|s| s.modality == Modality::Text).count(), 2);
    }

    #[test]
    fn crossmodal_with_text_and_audio() {
        let images = toy_store(2, 8, 4);
        let texts = text_store(2, 3, 4);
        let mut audio = text_store(2, 1, 4);
        for r in &mut audio.records {
            r.modality = Modality::Audio;
        }
        let ep = sample_episode(&images, 1, 0, Modality::Image).unwrap();
        let set = assemble_crossmodal_trainset(
            &ep,
            &[(&texts, Modality::Text), (&audio, Modality::Audio)],
            &BTreeMap::new(),
        )
        .unwrap();
        for c in 0..2 {
            assert_eq!(set.iter().filter(|s| s.class_id == c).count(), 3);
        }
    }

    #[test]
    fn crossmodal_view_counts_follow_selection() {
        let images = toy_store(2, 8, 4);
        let texts = text_store(2, 21, 4);
        let ep = sample_episode(&images, 2, 0, Modality::Image).unwrap();
        let views = BTreeMap::from([(Modality::Text, ViewSelection::All)]);
        let set = assemble_crossmodal_trainset(&ep, &[(&texts, Modality::Text)], &views).unwrap();
        assert_eq!(set.len(), 2 * (2 + 21));

        let views = BTreeMap::from([(Modality::Text, ViewSelection::Views(vec![20, 3]))]);
        let set = assemble_crossmodal_trainset(&ep, &[(&texts, Modality::Text)], &views).unwrap();
        let text_views: Vec<u16> = set.iter().filter(|s| s.modality == Modality::Text).map(|s| s.view_id).collect();
        assert_eq!(text_views, vec![20, 3, 20, 3]);
    }

    #[test]
    fn no_extra_stores_is_identity() {
        let images = toy_store(2, 8, 4);
        let ep = sample_episode(&images, 2, 0, Modality::Image).unwrap();
        let set = assemble_crossmodal_trainset(&ep, &[], &BTreeMap::new()).unwrap();
        assert_eq!(set, ep.train);
    }

    #[test]
    fn missing_text_class_is_reported() {
        let images = toy_store(3, 8, 4);
        let texts = text_store(2, 1, 4);
        let ep = sample_episode(&images, 1, 0, Modality::Image).unwrap();
        let err = assemble_crossmodal_trainset(&ep, &[(&texts, Modality::Text)], &BTreeMap::new())
            .unwrap_err();
        assert!(matches!(err, Error::MissingClassInModality { class_id: 2, .. }));
    }

    #[test]
    fn esc_tables_have_expected_sizes() {
        let m19 = EscMatching::builtin(EscVariant::Esc19);
        let m27 = EscMatching::builtin(EscVariant::Esc27);
        assert_eq!(m19.pairs.len(), 19);
        assert_eq!(m27.pairs.len(), 27);
        assert!(m19.pairs.iter().all(|p| m27.pairs.contains(p)));
        assert!(m19.pairs.contains(&("dog".to_string(), "otterhound".to_string())));
        assert!(m27.pairs.contains(&("sea-waves".to_string(), "sandbar".to_string())));
    }

    #[test]
    fn esc_cells_are_25_distinct_pairs() {
        let cells = esc_cells();
        assert_eq!(cells.len(), 25);
        assert_eq!(cells.iter().collect::<HashSet<_>>().len(), 25);
    }
}
