//! Command implementations.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use xmodal_core::augment::{self, TemplatePool, TemplateSource, ViewPolicy};
use xmodal_core::episodes::{
    assemble_crossmodal_trainset, build_esc_episode, episode_from_manifest, esc_cells, sample_episode, EpisodeSplit,
    EscMatching, SplitManifest, ViewSelection,
};
use xmodal_core::eval::{self, EvalReport, ReportFormat, ReportRow, RowContext, ShiftedTarget};
use xmodal_core::models::{self, ClassifierState};
use xmodal_core::par::{self, Exec};
use xmodal_core::store::{read_store, FeatureStore, Modality, Sample};
use xmodal_core::synth::{SynthBenchmark, SynthConfig};
use xmodal_core::trainer::{grid_search, train, Grid, TrainConfig, TrainResult};

use crate::{
    parse_view_policy, parse_view_selection, Command, EpisodeArgs, EscArgs, EscMethod, EvalArgs, InitKind,
    InspectArgs, InternalError, MineArgs, PcaArgs, ReplayArgs, ReportArgs, StoreCommand, SweepArgs,
    SynthArgs, TrainArgs, TrainFlags, ZeroshotArgs,
};

pub fn dispatch(command: &Command) -> Result<()> {
    match command {
        Command::Train(a) => cmd_train(a, command),
        Command::Zeroshot(a) => cmd_zeroshot(a, command),
        Command::Sweep(a) => cmd_sweep(a, command),
        Command::Mine(a) => cmd_mine(a, command),
        Command::Esc(a) => cmd_esc(a, command),
        Command::Eval(a) => cmd_eval(a, command),
        Command::Pca(a) => cmd_pca(a),
        Command::Report(a) => cmd_report(a),
        Command::Store(StoreCommand::Inspect(a)) => cmd_inspect(a),
        Command::Synth(a) => cmd_synth(a, command),
        Command::Replay(a) => cmd_replay(a),
    }
}

/// Everything needed to re-run a command bit-exactly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSpec {
    pub tool_version: String,
    pub command: Command,
    pub train_config: Option<TrainConfig>,
    pub grid: Option<Grid>,
}

fn load(path: &Path) -> Result<FeatureStore> {
    read_store(path).with_context(|| format!("loading {}", path.display()))
}

fn exec() -> Exec {
    Exec::default()
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn absolute(path: &mut PathBuf) {
    if let Ok(p) = std::path::absolute(&*path) {
        *path = p;
    }
}

fn pinned_flags(config: &TrainConfig) -> TrainFlags {
    TrainFlags {
        config: None,
        optimizer: Some(config.optimizer),
        lr0: Some(config.lr0),
        weight_decay: Some(config.weight_decay),
        batch_size: Some(config.batch_size),
        max_iters: Some(config.max_iters),
        warmup_iters: Some(config.warmup_iters),
        warmup_start_lr: Some(config.warmup_start_lr),
        eval_every: Some(config.eval_every),
        logit_scale: Some(config.logit_scale),
        adapter_enabled: config.adapter_enabled,
        residual_ratio: Some(config.residual_ratio),
    }
}

fn pin_episode(e: &mut EpisodeArgs) -> Result<()> {
    for p in [&mut e.features]
        .into_iter()
        .chain(e.text.as_mut())
        .chain(e.audio.as_mut())
        .chain(e.images.as_mut())
        .chain(e.split.as_mut())
        .chain(e.test_store.as_mut())
    {
        absolute(p);
    }
    if let Some(rest) = e.text_views.strip_prefix("mined:") {
        let mut p = PathBuf::from(rest);
        absolute(&mut p);
        e.text_views = format!("mined:{}", p.display());
    }
    Ok(())
}

/// Record the command with absolute paths and the resolved training configuration.
fn write_runspec(out: &Path, command: &Command, config: Option<&TrainConfig>, grid: Option<&Grid>) -> Result<()> {
    let mut command = command.clone();
    match &mut command {
        Command::Train(a) => {
            pin_episode(&mut a.episode)?;
            absolute(&mut a.output.out);
            if let Some(c) = config {
                a.train = pinned_flags(c);
            }
        }
        Command::Sweep(a) => {
            pin_episode(&mut a.episode)?;
            absolute(&mut a.output.out);
            if let Some(c) = config {
                a.train = pinned_flags(c);
            }
            if let Some(g) = grid {
                a.grid = serde_json::to_string(g)?;
            }
        }
        Command::Zeroshot(a) => {
            for p in [&mut a.features, &mut a.text, &mut a.output.out].into_iter().chain(a.test_store.as_mut()) {
                absolute(p);
            }
        }
        Command::Mine(a) => {
            for p in [&mut a.features, &mut a.text, &mut a.out].into_iter().chain(a.pool.as_mut()) {
                absolute(p);
            }
        }
        Command::Esc(a) => {
            for p in [&mut a.images, &mut a.audio, &mut a.out] {
                absolute(p);
            }
            if let Some(c) = config {
                a.train = pinned_flags(c);
            }
            if let Some(g) = grid {
                a.grid = Some(serde_json::to_string(g)?);
            }
        }
        Command::Eval(a) => {
            for p in [&mut a.checkpoint, &mut a.source, &mut a.out] {
                absolute(p);
            }
        }
        Command::Synth(a) => absolute(&mut a.out),
        _ => {}
    }
    let spec = RunSpec {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command,
        train_config: config.cloned(),
        grid: grid.cloned(),
    };
    write_json(&out.join("runspec.json"), &spec)
}

fn cmd_replay(a: &ReplayArgs) -> Result<()> {
    let text = fs::read_to_string(&a.runspec).with_context(|| format!("reading {}", a.runspec.display()))?;
    let spec: RunSpec = serde_json::from_str(&text).with_context(|| format!("parsing {}", a.runspec.display()))?;
    let mut command = spec.command;
    if let Some(out) = &a.out {
        match &mut command {
            Command::Train(x) => x.output.out = out.clone(),
            Command::Sweep(x) => x.output.out = out.clone(),
            Command::Zeroshot(x) => x.output.out = out.clone(),
            Command::Mine(x) => x.out = out.clone(),
            Command::Esc(x) => x.out = out.clone(),
            Command::Eval(x) => x.out = out.clone(),
            Command::Synth(x) => x.out = out.clone(),
            _ => bail!("runspec command has no output directory"),
        }
    }
    if matches!(command, Command::Replay(_)) {
        bail!("a runspec cannot replay another runspec");
    }
    dispatch(&command)
}

fn parse_grid(spec: &str) -> Result<Grid> {
    if let Some(g) = Grid::preset(spec) {
        return Ok(g);
    }
    if spec.trim_start().starts_with('{') {
        return serde_json::from_str(spec).context("parsing inline grid");
    }
    let text = fs::read_to_string(spec).with_context(|| format!("unknown grid preset or file {spec:?}"))?;
    serde_json::from_str(&text).with_context(|| format!("parsing grid {spec}"))
}

/// Write raw rows, both aggregate renderings, and print the markdown table.
fn emit_report(out: &Path, report: &EvalReport) -> Result<()> {
    report.write_rows(&out.join("rows.csv"))?;
    report.emit(ReportFormat::Csv, &out.join("report.csv"))?;
    report.emit(ReportFormat::Markdown, &out.join("report.md"))?;
    print!("{}", report.render(ReportFormat::Markdown)?);
    Ok(())
}

fn result_json(result: &TrainResult, timing: bool) -> Result<serde_json::Value> {
    let mut v = serde_json::to_value(result)?;
    if !timing {
        if let Some(o) = v.as_object_mut() {
            o.remove("wallclock_seconds");
        }
    }
    Ok(v)
}

/// Loaded stores and resolved options shared by `train` and `sweep`.
struct Inputs {
    primary: FeatureStore,
    modality: Modality,
    extras: BTreeMap<Modality, FeatureStore>,
    trained_extras: Vec<Modality>,
    test_store: Option<FeatureStore>,
    split: Option<SplitManifest>,
    init: InitKind,
    text_views: ViewSelection,
    image_views: ViewPolicy,
    dataset: String,
    shots: usize,
}

/// One seed's training inputs.
struct Prepared {
    episode: EpisodeSplit,
    trainset: Vec<Sample>,
    init: ClassifierState,
}

impl Inputs {
    fn load(a: &EpisodeArgs) -> Result<Self> {
        let primary = load(&a.features)?;
        let mut extras = BTreeMap::new();
        for (m, path) in [(Modality::Text, &a.text), (Modality::Audio, &a.audio), (Modality::Image, &a.images)] {
            if let Some(p) = path {
                if m == a.modality {
                    bail!("--{} duplicates the target modality of --features", m.as_str());
                }
                extras.insert(m, load(p)?);
            }
        }
        let trained_extras: Vec<Modality> = if a.modalities.is_empty() {
            extras.keys().copied().collect()
        } else {
            if !a.modalities.contains(&a.modality) {
                bail!("--modalities must include the target modality {}", a.modality);
            }
            let mut ms: Vec<Modality> = a.modalities.iter().copied().filter(|&m| m != a.modality).collect();
            ms.sort();
            ms.dedup();
            for m in &ms {
                if !extras.contains_key(m) {
                    bail!("modality {m} requested but no store given for it");
                }
            }
            ms
        };
        let init = a.init.unwrap_or(if extras.contains_key(&Modality::Text) {
            InitKind::Text
        } else {
            InitKind::Zero
        });
        if init == InitKind::Text && !extras.contains_key(&Modality::Text) {
            bail!("--init text requires --text");
        }
        let dataset = a.dataset.clone().unwrap_or_else(|| primary.manifest.dataset.clone());
        Ok(Self {
            modality: a.modality,
            extras,
            trained_extras,
            test_store: a.test_store.as_deref().map(load).transpose()?,
            split: a.split.as_deref().map(SplitManifest::load).transpose()?,
            init,
            text_views: parse_view_selection(&a.text_views)?,
            image_views: parse_view_policy(&a.image_views)?,
            dataset,
            shots: a.shots,
            primary,
        })
    }

    fn default_method(&self, config: &TrainConfig) -> String {
        let base = if self.trained_extras.is_empty() { "uni-modal" } else { "cross-modal" };
        let head = if config.adapter_enabled { "adapter" } else { "linear" };
        format!("{base}-{head}")
    }

    fn zeroshot(&self, class_ids: &[u32]) -> Result<ClassifierState> {
        let text = self.extras.get(&Modality::Text).ok_or_else(|| anyhow!("zero-shot head requires --text"))?;
        Ok(models::init_from_text(text, class_ids, &self.text_views)?)
    }

    fn prepare(&self, seed: u64) -> Result<Prepared> {
        let mut episode = match &self.split {
            Some(split) => episode_from_manifest(&self.primary, split, self.modality)?,
            None => sample_episode(&self.primary, self.shots, seed, self.modality)?,
        };
        episode.seed = seed;
        if let Some(ts) = &self.test_store {
            episode = episode.with_test_store(ts)?;
        }
        if self.image_views != ViewPolicy::CenterOnly {
            episode.train = augment::expand_views(&episode, &self.primary, self.image_views)?;
        }
        let extra: Vec<(&FeatureStore, Modality)> =
            self.trained_extras.iter().map(|m| (&self.extras[m], *m)).collect();
        let views = BTreeMap::from([(Modality::Text, self.text_views.clone())]);
        let trainset = assemble_crossmodal_trainset(&episode, &extra, &views)?;
        let init = match self.init {
            InitKind::Text => self.zeroshot(&episode.class_ids)?,
            InitKind::Zero => ClassifierState::zeros(episode.class_ids.clone(), self.primary.dimension, models::DEFAULT_LOGIT_SCALE),
        };
        Ok(Prepared {
            episode,
            trainset,
            init,
        })
    }
}

fn row(dataset: &str, method: &str, shots: usize, seed: u64, accuracy: f64, seconds: Option<f64>) -> ReportRow {
    ReportRow {
        dataset: dataset.to_string(),
        method: method.to_string(),
        shots,
        seed,
        accuracy,
        seconds,
    }
}

struct SeedRun {
    seed: u64,
    episode: EpisodeSplit,
    result: TrainResult,
    accuracy: f64,
    wise_accuracy: Option<f64>,
}

fn cmd_train(a: &TrainArgs, command: &Command) -> Result<()> {
    let config = a.train.resolve()?;
    let inputs = Inputs::load(&a.episode)?;
    if a.wise_alpha.is_some() && config.adapter_enabled {
        bail!("--wise-alpha applies to linear heads only");
    }
    let out = &a.output.out;
    create_dir(out)?;
    write_runspec(out, command, Some(&config), None)?;

    let runs = par::try_map(exec(), &a.episode.seeds, |&seed| -> Result<SeedRun> {
        let p = inputs.prepare(seed)?;
        let cfg = TrainConfig { seed, ..config.clone() };
        let result = train(&cfg, &p.trainset, &p.episode.val, &p.init, None)?;
        let accuracy = eval::top1_accuracy(&result.best_state, result.best_adapter.as_ref(), &p.episode.test)?;
        let wise_accuracy = match a.wise_alpha {
            Some(alpha) => {
                let zs = inputs.zeroshot(&p.episode.class_ids)?;
                let blended = models::wise_ft(&result.best_state, &zs, alpha)?;
                Some(eval::top1_accuracy(&blended, None, &p.episode.test)?)
            }
            None => None,
        };
        Ok(SeedRun {
            seed,
            episode: p.episode,
            result,
            accuracy,
            wise_accuracy,
        })
    })?;

    let method = a.output.method.clone().unwrap_or_else(|| inputs.default_method(&config));
    let mut report = EvalReport::default();
    for run in &runs {
        let dir = out.join(format!("seed-{}", run.seed));
        create_dir(&dir)?;
        models::write_checkpoint(&dir.join("checkpoint.xmck"), &run.result.best_state, run.result.best_adapter.as_ref())?;
        write_json(&dir.join("train.json"), &result_json(&run.result, a.output.timing)?)?;
        fs::write(dir.join("episode.json"), run.episode.to_json() + "\n")?;
        let seconds = a.output.timing.then_some(run.result.wallclock_seconds);
        report.rows.push(row(&inputs.dataset, &method, inputs.shots, run.seed, run.accuracy, seconds));
        if let Some(acc) = run.wise_accuracy {
            report.rows.push(row(&inputs.dataset, &format!("{method}-wiseft"), inputs.shots, run.seed, acc, None));
        }
    }
    emit_report(out, &report)
}

fn cmd_zeroshot(a: &ZeroshotArgs, command: &Command) -> Result<()> {
    let primary = load(&a.features)?;
    let text = load(&a.text)?;
    let views = parse_view_selection(&a.text_views)?;
    let class_ids = primary.class_ids(a.modality);
    let state = models::init_from_text(&text, &class_ids, &views)?;
    let test = match &a.test_store {
        Some(p) => load(p)?.evaluation_samples(a.modality)?,
        None => primary.evaluation_samples(a.modality)?,
    };
    let accuracy = eval::top1_accuracy(&state, None, &test)?;
    create_dir(&a.output.out)?;
    write_runspec(&a.output.out, command, None, None)?;
    models::write_checkpoint(&a.output.out.join("zeroshot.xmck"), &state, None)?;
    let dataset = a.dataset.clone().unwrap_or_else(|| primary.manifest.dataset.clone());
    let method = a.output.method.clone().unwrap_or_else(|| "zero-shot".into());
    emit_report(&a.output.out, &EvalReport::new(vec![row(&dataset, &method, 0, 0, accuracy, None)]))
}

#[derive(Serialize)]
struct SweepPoint<'a> {
    config: &'a TrainConfig,
    best_val_accuracy: f64,
}

fn cmd_sweep(a: &SweepArgs, command: &Command) -> Result<()> {
    let base = a.train.resolve()?;
    let grid = parse_grid(&a.grid)?;
    let inputs = Inputs::load(&a.episode)?;
    let out = &a.output.out;
    create_dir(out)?;
    write_runspec(out, command, Some(&base), Some(&grid))?;

    let method = a.output.method.clone().unwrap_or_else(|| inputs.default_method(&base));
    let mut report = EvalReport::default();
    for &seed in &a.episode.seeds {
        let p = inputs.prepare(seed)?;
        let cfg = TrainConfig { seed, ..base.clone() };
        let search = grid_search(&grid, &cfg, &p.trainset, &p.episode.val, &p.init, None, exec())?;
        let best = &search.best_result;
        let accuracy = eval::top1_accuracy(&best.best_state, best.best_adapter.as_ref(), &p.episode.test)?;
        let dir = out.join(format!("seed-{seed}"));
        create_dir(&dir)?;
        let points: Vec<SweepPoint> = search
            .points
            .iter()
            .map(|(config, acc)| SweepPoint {
                config,
                best_val_accuracy: *acc,
            })
            .collect();
        write_json(&dir.join("sweep.json"), &points)?;
        write_json(&dir.join("best-config.json"), &search.best_config)?;
        write_json(&dir.join("train.json"), &result_json(best, a.output.timing)?)?;
        models::write_checkpoint(&dir.join("checkpoint.xmck"), &best.best_state, best.best_adapter.as_ref())?;
        fs::write(dir.join("episode.json"), p.episode.to_json() + "\n")?;
        let seconds = a.output.timing.then_some(best.wallclock_seconds);
        report.rows.push(row(&inputs.dataset, &method, inputs.shots, seed, accuracy, seconds));
    }
    emit_report(out, &report)
}

/// Output of `mine`, also accepted by `--text-views mined:<file>`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinedTemplates {
    pub k: usize,
    pub shots: usize,
    pub seed: u64,
    pub template_ids: Vec<u16>,
    pub templates: Vec<String>,
    /// `(template id, validation accuracy)` for every candidate.
    pub scores: Vec<(usize, f64)>,
}

fn cmd_mine(a: &MineArgs, command: &Command) -> Result<()> {
    if a.k == 0 {
        bail!("--k must be at least 1");
    }
    let primary = load(&a.features)?;
    let text = load(&a.text)?;
    let pool = match &a.pool {
        Some(p) => TemplatePool::from_file(p, TemplateSource::MinedPool)?.templates,
        None => text.manifest.templates.clone().unwrap_or_else(|| TemplatePool::mined_pool().templates),
    };
    let episode = sample_episode(&primary, a.shots, a.seed, a.modality)?;
    let (ids, scores) = augment::mine_for_episode(&text, &episode, a.k, exec())?;
    let templates: Vec<String> = ids
        .iter()
        .map(|&t| pool.get(t as usize).cloned().unwrap_or_else(|| format!("<template {t}>")))
        .collect();
    create_dir(&a.out)?;
    write_runspec(&a.out, command, None, None)?;
    let mined = MinedTemplates {
        k: a.k,
        shots: a.shots,
        seed: a.seed,
        template_ids: ids,
        templates,
        scores,
    };
    write_json(&a.out.join("mined.json"), &mined)?;
    fs::write(a.out.join("mined.txt"), mined.templates.join("\n") + "\n")?;
    println!(
        "{}",
        mined.template_ids.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
    );
    Ok(())
}

fn method_label(method: EscMethod) -> &'static str {
    match method {
        EscMethod::Uni => "uni-modal-linear",
        EscMethod::Cross => "cross-modal-linear",
    }
}

/// First `n` samples of each class (samples are grouped by class).
fn first_per_class(samples: &[Sample], n: usize) -> Vec<Sample> {
    let mut taken: BTreeMap<u32, usize> = BTreeMap::new();
    samples
        .iter()
        .filter(|s| {
            let c = taken.entry(s.class_id).or_default();
            *c += 1;
            *c <= n
        })
        .cloned()
        .collect()
}

fn cmd_esc(a: &EscArgs, command: &Command) -> Result<()> {
    let config = a.train.resolve()?;
    let grid = a.grid.as_deref().map(parse_grid).transpose()?;
    let images = load(&a.images)?;
    let audio = load(&a.audio)?;
    let matching = EscMatching::builtin(a.variant);
    for t in &a.targets {
        if *t == Modality::Text {
            bail!("ESC targets are image and audio");
        }
    }
    if a.extra_shots == 0 || a.extra_shots > a.shots {
        bail!("--extra-shots must lie in 1..=--shots");
    }
    create_dir(&a.out)?;
    write_runspec(&a.out, command, Some(&config), grid.as_ref())?;

    let cells = esc_cells();
    let rows = par::try_map(exec(), &cells, |&(fold, split)| -> Result<Vec<ReportRow>> {
        let ep = build_esc_episode(&images, &audio, &matching, fold, split, a.shots)?;
        let run_id = u64::from(fold - 1) * 5 + u64::from(split);
        let mut rows = Vec::new();
        for &target in &a.targets {
            let (own, other) = match target {
                Modality::Image => (&ep.image, &ep.audio),
                _ => (&ep.audio, &ep.image),
            };
            let init = ClassifierState::zeros(own.class_ids.clone(), images.dimension, models::DEFAULT_LOGIT_SCALE);
            for &method in &a.methods {
                let mut trainset = own.train.clone();
                if method == EscMethod::Cross {
                    trainset.extend(first_per_class(&other.train, a.extra_shots));
                }
                let cfg = TrainConfig { seed: run_id, ..config.clone() };
                let result = match &grid {
                    Some(g) => grid_search(g, &cfg, &trainset, &own.val, &init, None, Exec::Sequential)?.best_result,
                    None => train(&cfg, &trainset, &own.val, &init, None)?,
                };
                let accuracy = eval::top1_accuracy(&result.best_state, None, &own.test)?;
                rows.push(row(
                    &format!("{}/{}", a.variant.name(), target),
                    method_label(method),
                    a.shots,
                    run_id,
                    accuracy,
                    a.timing.then_some(result.wallclock_seconds),
                ));
            }
        }
        Ok(rows)
    })?;
    let report = EvalReport::new(rows.into_iter().flatten().collect());
    let expected = cells.len() * a.targets.len() * a.methods.len();
    if report.rows.len() != expected {
        return Err(InternalError(format!("expected {expected} ESC rows, produced {}", report.rows.len())).into());
    }
    emit_report(&a.out, &report)
}

fn parse_target(spec: &str) -> Result<(String, PathBuf, Option<PathBuf>)> {
    let (name, rest) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("--target expects NAME=STORE[@REMAP], got {spec:?}"))?;
    let (store, remap) = match rest.split_once('@') {
        Some((s, r)) => (s, Some(PathBuf::from(r))),
        None => (rest, None),
    };
    Ok((name.to_string(), PathBuf::from(store), remap))
}

fn cmd_eval(a: &EvalArgs, command: &Command) -> Result<()> {
    let (state, adapter) = models::read_checkpoint(&a.checkpoint)
        .with_context(|| format!("loading checkpoint {}", a.checkpoint.display()))?;
    let source = load(&a.source)?;
    let parsed: Vec<(String, PathBuf, Option<PathBuf>)> = a.targets.iter().map(|t| parse_target(t)).collect::<Result<_>>()?;
    let stores: Vec<FeatureStore> = parsed.iter().map(|(_, p, _)| load(p)).collect::<Result<_>>()?;
    let mut targets = Vec::with_capacity(parsed.len());
    for ((name, _, remap), store) in parsed.iter().zip(&stores) {
        targets.push(ShiftedTarget {
            name: name.clone(),
            store,
            remap: remap.as_deref().map(eval::load_remap).transpose()?,
        });
    }
    let dataset = a.dataset.clone().unwrap_or_else(|| source.manifest.dataset.clone());
    let ctx = RowContext {
        method: a.method.clone().unwrap_or_else(|| "checkpoint".into()),
        shots: a.shots,
        seed: a.seed,
    };
    let rows = eval::eval_shifted(&state, adapter.as_ref(), &dataset, &source, &targets, a.modality, &ctx)?;
    create_dir(&a.out)?;
    write_runspec(&a.out, command, None, None)?;
    emit_report(&a.out, &EvalReport::new(rows))
}

fn cmd_pca(a: &PcaArgs) -> Result<()> {
    let (state, _) = models::read_checkpoint(&a.checkpoint)
        .with_context(|| format!("loading checkpoint {}", a.checkpoint.display()))?;
    let classes: Vec<u32> = if a.classes.is_empty() {
        state.class_ids.iter().take(2).copied().collect()
    } else {
        a.classes.clone()
    };
    let mut rows = Vec::with_capacity(classes.len());
    for c in &classes {
        let i = state
            .index_of(*c)
            .ok_or_else(|| anyhow!("class {c} is not in the checkpoint"))?;
        rows.push(state.row(i).to_vec());
    }
    let sub = ClassifierState::from_rows(classes.clone(), &rows, state.logit_scale)?;
    let mut features = Vec::new();
    for path in &a.features {
        let store = load(path)?;
        let test_ids = store.test_ids();
        for r in &store.records {
            if r.view_id == 0 && classes.contains(&r.class_id) && !test_ids.contains(&r.sample_id) {
                features.push(r.to_sample()?);
            }
        }
    }
    if let Some(parent) = a.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let fig = eval::pca_figure(&features, &sub, &a.out)?;
    println!(
        "wrote {} ({} points{})",
        a.out.display(),
        fig.points.len(),
        if fig.boundary.is_some() { ", with boundary" } else { "" }
    );
    Ok(())
}

fn cmd_report(a: &ReportArgs) -> Result<()> {
    let mut report = EvalReport::default();
    for path in &a.rows {
        report.extend(EvalReport::read_rows(path)?.rows);
    }
    match &a.out {
        Some(path) => report.emit(a.format, path)?,
        None => print!("{}", report.render(a.format)?),
    }
    Ok(())
}

#[derive(Serialize)]
struct StoreSummary {
    dataset: String,
    dimension: usize,
    records: usize,
    classes: usize,
    normalized: bool,
    templates: usize,
    test_samples: usize,
    folds: BTreeMap<u8, usize>,
    per_modality: BTreeMap<Modality, ModalitySummary>,
}

#[derive(Serialize, Default)]
struct ModalitySummary {
    records: usize,
    canonical: usize,
    classes: usize,
    max_view_id: u16,
}

fn cmd_inspect(a: &InspectArgs) -> Result<()> {
    let store = load(&a.path)?;
    let mut per_modality: BTreeMap<Modality, ModalitySummary> = BTreeMap::new();
    for r in &store.records {
        let m = per_modality.entry(r.modality).or_default();
        m.records += 1;
        m.canonical += usize::from(r.view_id == 0);
        m.max_view_id = m.max_view_id.max(r.view_id);
    }
    for (m, s) in per_modality.iter_mut() {
        s.classes = store.class_ids(*m).len();
    }
    let mut folds = BTreeMap::new();
    for f in store.manifest.folds.values() {
        *folds.entry(*f).or_default() += 1;
    }
    let summary = StoreSummary {
        dataset: store.manifest.dataset.clone(),
        dimension: store.dimension,
        records: store.records.len(),
        classes: store.manifest.classes.len(),
        normalized: store.manifest.normalized,
        templates: store.manifest.templates.as_ref().map_or(0, Vec::len),
        test_samples: store.manifest.test_samples.len(),
        folds,
        per_modality,
    };
    if a.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
        return Ok(());
    }
    println!("dataset      {}", summary.dataset);
    println!("dimension    {}", summary.dimension);
    println!("records      {}", summary.records);
    println!("classes      {}", summary.classes);
    println!("normalized   {}", summary.normalized);
    println!("templates    {}", summary.templates);
    println!("test samples {}", summary.test_samples);
    for (f, n) in &summary.folds {
        println!("fold {f}       {n}");
    }
    for (m, s) in &summary.per_modality {
        println!(
            "{:<12} {} records, {} canonical, {} classes, views 0..={}",
            m.as_str(),
            s.records,
            s.canonical,
            s.classes,
            s.max_view_id
        );
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs, command: &Command) -> Result<()> {
    let config = SynthConfig {
        seed: a.seed,
        classes: a.classes,
        dim: a.dim,
        templates: a.templates,
        ..SynthConfig::default()
    };
    let bench = match a.esc {
        Some(v) => SynthBenchmark::generate_esc(&config, v)?,
        None => SynthBenchmark::generate(&config)?,
    };
    bench.write(&a.out)?;
    write_runspec(&a.out, command, None, None)?;
    println!("wrote image.xmf, text.xmf, audio.xmf to {}", a.out.display());
    Ok(())
}
