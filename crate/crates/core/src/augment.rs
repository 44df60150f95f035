//! Text templates, template mining and multi-view image expansion.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::episodes::{EpisodeSplit, ViewSelection};
use crate::error::{Error, Result};
use crate::eval::top1_accuracy;
use crate::models::init_from_text;
use crate::par::{self, Exec};
use crate::store::{FeatureStore, Modality, Sample};

pub const PLACEHOLDER: &str = "{cls}";
pub const MINED_POOL_SIZE: usize = 180;
pub const DEFAULT_MINED_COUNT: usize = 21;

const MINED_POOL: &str = include_str!("../data/templates180.txt");
const HAND_ENGINEERED: &str = include_str!("../data/hand_engineered.json");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateSource {
    Classname,
    Single,
    HandEngineered,
    MinedPool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplatePool {
    pub templates: Vec<String>,
    pub source: TemplateSource,
}

fn check_template(t: &str) -> Result<()> {
    match t.matches(PLACEHOLDER).count() {
        1 => Ok(()),
        n => Err(Error::BadTemplate(format!("{t:?} has {n} placeholders"))),
    }
}

impl TemplatePool {
    pub fn new(templates: Vec<String>, source: TemplateSource) -> Result<Self> {
        if templates.is_empty() {
            return Err(Error::BadTemplate("empty template pool".into()));
        }
        templates.iter().try_for_each(|t| check_template(t))?;
        Ok(Self { templates, source })
    }

    pub fn classname() -> Self {
        Self {
            templates: vec![PLACEHOLDER.to_string()],
            source: TemplateSource::Classname,
        }
    }

    pub fn single() -> Self {
        Self {
            templates: vec!["a photo of a {cls}.".to_string()],
            source: TemplateSource::Single,
        }
    }

    /// The 180-template mining pool, in table order.
    pub fn mined_pool() -> Self {
        Self {
            templates: MINED_POOL.lines().map(str::to_string).collect(),
            source: TemplateSource::MinedPool,
        }
    }

    /// Per-dataset hand-crafted prompts; `None` for unknown datasets.
    pub fn hand_engineered(dataset: &str) -> Option<Self> {
        let table: BTreeMap<String, Vec<String>> =
            serde_json::from_str(HAND_ENGINEERED).expect("bundled template table parses");
        table.get(dataset).map(|t| Self {
            templates: t.clone(),
            source: TemplateSource::HandEngineered,
        })
    }

    pub fn hand_engineered_datasets() -> Vec<String> {
        let table: BTreeMap<String, Vec<String>> =
            serde_json::from_str(HAND_ENGINEERED).expect("bundled template table parses");
        table.into_keys().collect()
    }

    /// One template per non-empty line.
    pub fn from_file(path: &Path, source: TemplateSource) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let templates = text
            .lines()
            .map(|l| l.trim_end_matches('\r'))
            .filter(|l| !l.trim().is_empty())
            .map(str::to_string)
            .collect();
        Self::new(templates, source)
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn apply_all(&self, class_name: &str) -> Result<Vec<String>> {
        self.templates.iter().map(|t| apply_template(t, class_name)).collect()
    }
}

/// Substitute `class_name` for the single `{cls}` placeholder, verbatim.
pub fn apply_template(template: &str, class_name: &str) -> Result<String> {
    check_template(template)?;
    Ok(template.replacen(PLACEHOLDER, class_name, 1))
}

/// The `k` best templates by accuracy; ties go to the lower id.
pub fn mine_templates(scores: &[(usize, f64)], k: usize) -> Vec<usize> {
    let mut ranked = scores.to_vec();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.into_iter().take(k).map(|(id, _)| id).collect()
}

/// Zero-shot accuracy on `val` of a text-initialized classifier built from
/// each template (text view id) alone.
pub fn template_accuracies(
    text_store: &FeatureStore,
    class_ids: &[u32],
    val: &[Sample],
    template_ids: &[u16],
    exec: Exec,
) -> Result<Vec<(usize, f64)>> {
    par::try_map(exec, template_ids, |&t| {
        let state = init_from_text(text_store, class_ids, &ViewSelection::Views(vec![t]))?;
        Ok((t as usize, top1_accuracy(&state, None, val)?))
    })
}

/// Text view ids present for every class in `class_ids`, ascending.
pub fn available_templates(text_store: &FeatureStore, class_ids: &[u32]) -> Vec<u16> {
    let test_ids = text_store.test_ids();
    let mut per_class: BTreeMap<u32, HashSet<u16>> = class_ids.iter().map(|&c| (c, HashSet::new())).collect();
    for r in &text_store.records {
        if r.modality == Modality::Text && !test_ids.contains(&r.sample_id) {
            if let Some(views) = per_class.get_mut(&r.class_id) {
                views.insert(r.view_id);
            }
        }
    }
    let mut iter = per_class.into_values();
    let Some(first) = iter.next() else {
        return Vec::new();
    };
    let common = iter.fold(first, |acc, s| acc.intersection(&s).copied().collect());
    let mut out: Vec<u16> = common.into_iter().collect();
    out.sort_unstable();
    out
}

/// Mine `k` templates for an episode and return them as a text view selection.
pub fn mine_for_episode(
    text_store: &FeatureStore,
    episode: &EpisodeSplit,
    k: usize,
    exec: Exec,
) -> Result<(Vec<u16>, Vec<(usize, f64)>)> {
    let ids = available_templates(text_store, &episode.class_ids);
    if ids.is_empty() {
        return Err(Error::MissingClassText(episode.class_ids.first().copied().unwrap_or(0)));
    }
    let scores = template_accuracies(text_store, &episode.class_ids, &episode.val, &ids, exec)?;
    let mined = mine_templates(&scores, k).into_iter().map(|t| t as u16).collect();
    Ok((mined, scores))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViewPolicy {
    CenterOnly,
    PlusFlip,
    RandomCrops(u16),
}

impl ViewPolicy {
    /// Extra view ids beyond the canonical view 0.
    pub fn extra_views(self) -> Vec<u16> {
        match self {
            ViewPolicy::CenterOnly => Vec::new(),
            ViewPolicy::PlusFlip => vec![1],
            ViewPolicy::RandomCrops(k) => (1..=k).collect(),
        }
    }
}

impl std::str::FromStr for ViewPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "center" | "center_only" => Ok(ViewPolicy::CenterOnly),
            "flip" | "plus_flip" => Ok(ViewPolicy::PlusFlip),
            other => other
                .strip_prefix("crops")
                .map(|k| k.trim_start_matches([':', '=']))
                .and_then(|k| k.parse().ok())
                .map(ViewPolicy::RandomCrops)
                .ok_or_else(|| format!("unknown view policy {other:?} (center, flip, crops:K)")),
        }
    }
}

/// Each train sample followed by its extra views from `store`.
pub fn expand_views(episode: &EpisodeSplit, store: &FeatureStore, policy: ViewPolicy) -> Result<Vec<Sample>> {
    let extra = policy.extra_views();
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(episode.train.len() * (1 + extra.len()));
    for s in &episode.train {
        if seen.insert((s.sample_id, s.modality, s.view_id)) {
            out.push(s.clone());
        }
        for &view_id in &extra {
            let key = crate::store::RecordKey {
                class_id: s.class_id,
                modality: s.modality,
                sample_id: s.sample_id,
                view_id,
            };
            let record = store.find(key).ok_or(Error::MissingView {
                sample_id: s.sample_id,
                view_id,
            })?;
            if seen.insert((s.sample_id, s.modality, view_id)) {
                out.push(record.to_sample()?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{FeatureRecord, Manifest};

    #[test]
    fn apply_examples() {
        assert_eq!(apply_template("a photo of a {cls}.", "dog").unwrap(), "a photo of a dog.");
        assert_eq!(apply_template("{cls}", "otterhound").unwrap(), "otterhound");
        assert_eq!(apply_template("{cls} texture.", "banded").unwrap(), "banded texture.");
        assert_eq!(apply_template("a {cls}", "Big Cat").unwrap(), "a Big Cat");
    }

    #[test]
    fn bad_templates() {
        assert!(matches!(apply_template("no placeholder", "x"), Err(Error::BadTemplate(_))));
        assert!(matches!(apply_template("{cls} and {cls}", "x"), Err(Error::BadTemplate(_))));
        let once = apply_template("a photo of a {cls}.", "dog").unwrap();
        assert!(matches!(apply_template(&once, "dog"), Err(Error::BadTemplate(_))));
    }

    #[test]
    fn bundled_pools_are_valid() {
        let pool = TemplatePool::mined_pool();
        assert_eq!(pool.len(), MINED_POOL_SIZE);
        assert_eq!(pool.templates[0], "{cls}");
        assert!(TemplatePool::new(pool.templates.clone(), TemplateSource::MinedPool).is_ok());
        for name in TemplatePool::hand_engineered_datasets() {
            let p = TemplatePool::hand_engineered(&name).unwrap();
            assert!(TemplatePool::new(p.templates, TemplateSource::HandEngineered).is_ok(), "{name}");
        }
        let pets = TemplatePool::hand_engineered("oxford_pets").unwrap();
        assert_eq!(pets.templates, vec!["a photo of a {cls}, a type of pet."]);
        assert!(TemplatePool::hand_engineered("nope").is_none());
    }

    #[test]
    fn mining_examples() {
        assert_eq!(mine_templates(&[(0, 0.5), (1, 0.9), (2, 0.9)], 2), vec![1, 2]);
        assert_eq!(mine_templates(&[(0, 0.5), (1, 0.9), (2, 0.7)], 10), vec![1, 2, 0]);
        let scores: Vec<(usize, f64)> = (0..180).map(|i| (i, ((i * 37) % 180) as f64 / 180.0)).collect();
        assert_eq!(mine_templates(&scores, 21).len(), 21);
    }

    #[test]
    fn view_policy_parsing() {
        assert_eq!("center".parse::<ViewPolicy>().unwrap(), ViewPolicy::CenterOnly);
        assert_eq!("flip".parse::<ViewPolicy>().unwrap(), ViewPolicy::PlusFlip);
        assert_eq!("crops:10".parse::<ViewPolicy>().unwrap(), ViewPolicy::RandomCrops(10));
        assert!("blur".parse::<ViewPolicy>().is_err());
    }

    fn store(views: u16) -> FeatureStore {
        let mut s = FeatureStore::new(2, Manifest::default());
        s.manifest.classes.insert(0, "a".into());
        for sample_id in 0..2 {
            for view_id in 0..=views {
                s.records.push(FeatureRecord {
                    sample_id,
                    class_id: 0,
                    modality: Modality::Image,
                    view_id,
                    vector: vec![1.0, view_id as f32 + sample_id as f32],
                });
            }
        }
        s
    }

    fn episode(s: &FeatureStore) -> EpisodeSplit {
        EpisodeSplit {
            shots: 2,
            seed: 0,
            modality: Modality::Image,
            class_ids: vec![0],
            train: s.records.iter().filter(|r| r.view_id == 0).map(|r| r.to_sample().unwrap()).collect(),
            val: vec![],
            test: vec![],
        }
    }

    #[test]
    fn expand_examples() {
        let s = store(10);
        let ep = episode(&s);
        assert_eq!(expand_views(&ep, &s, ViewPolicy::CenterOnly).unwrap(), ep.train);
        assert_eq!(expand_views(&ep, &s, ViewPolicy::PlusFlip).unwrap().len(), 4);
        let crops = expand_views(&ep, &s, ViewPolicy::RandomCrops(10)).unwrap();
        assert_eq!(crops.len(), 22);
        let keys: HashSet<_> = crops.iter().map(|x| (x.sample_id, x.view_id)).collect();
        assert_eq!(keys.len(), crops.len());
    }

    #[test]
    fn missing_view_is_an_error() {
        let s = store(0);
        let ep = episode(&s);
        assert!(matches!(
            expand_views(&ep, &s, ViewPolicy::PlusFlip),
            Err(Error::MissingView { view_id: 1, .. })
        ));
    }
}
