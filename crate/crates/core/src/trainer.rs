//! Cross-modal training: temperature-scaled cross-entropy over mixed-modality
//! batches, AdamW or plain SGD, linear warmup followed by cosine annealing,
//! and early stopping on few-shot validation accuracy.
//!
//! Logits are `logit_scale * (W f)` where `f` is the (optionally adapted)
//! unit-norm feature. One run is single-threaded and bit-deterministic for a
//! given config; [`grid_search`] parallelizes across runs.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{AdapterState, AdapterTrace, ClassifierState, DEFAULT_LOGIT_SCALE, DEFAULT_RESIDUAL_RATIO};
use crate::par::{self, Exec};
use crate::rng::SplitMix64;
use crate::store::{Modality, Sample};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    AdamW,
    Sgd,
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "adamw" => Ok(OptimizerKind::AdamW),
            "sgd" => Ok(OptimizerKind::Sgd),
            other => Err(format!("unknown optimizer {other:?} (use adamw or sgd)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub lr0: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_iters: usize,
    pub warmup_iters: usize,
    pub warmup_start_lr: f64,
    pub eval_every: usize,
    pub logit_scale: f64,
    pub seed: u64,
    pub adapter_enabled: bool,
    #[serde(default = "default_residual_ratio")]
    pub residual_ratio: f64,
}

fn default_residual_ratio() -> f64 {
    DEFAULT_RESIDUAL_RATIO
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::AdamW,
            lr0: 1e-3,
            weight_decay: 0.0,
            batch_size: 32,
            max_iters: 12800,
            warmup_iters: 50,
            warmup_start_lr: 1e-5,
            eval_every: 100,
            logit_scale: DEFAULT_LOGIT_SCALE,
            seed: 0,
            adapter_enabled: false,
            residual_ratio: DEFAULT_RESIDUAL_RATIO,
        }
    }
}

impl TrainConfig {
    /// `max_iters == 0` is allowed and means "return the initial state".
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if !(self.lr0 > 0.0) || !(self.warmup_start_lr > 0.0) {
            return fail("learning rates must be positive".into());
        }
        if !(self.weight_decay >= 0.0) {
            return fail("weight decay must be non-negative".into());
        }
        if self.batch_size == 0 || self.eval_every == 0 {
            return fail("batch_size and eval_every must be positive".into());
        }
        if !(self.logit_scale > 0.0) {
            return fail("logit scale must be positive".into());
        }
        if self.max_iters > 0 && self.warmup_iters >= self.max_iters {
            return fail(format!(
                "warmup_iters ({}) must be below max_iters ({})",
                self.warmup_iters, self.max_iters
            ));
        }
        if !(0.0..=1.0).contains(&self.residual_ratio) {
            return fail("residual ratio must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Learning rate at iteration `t`: linear warmup from `warmup_start_lr` to
/// `lr0`, then half-cosine decay from `lr0` to zero at `max_iters`.
pub fn lr_at(config: &TrainConfig, t: usize) -> f64 {
    let warmup = config.warmup_iters;
    if t < warmup {
        let frac = t as f64 / warmup as f64;
        return config.warmup_start_lr + (config.lr0 - config.warmup_start_lr) * frac;
    }
    let span = config.max_iters.saturating_sub(warmup);
    if span == 0 {
        return config.lr0;
    }
    let progress = ((t - warmup) as f64 / span as f64).min(1.0);
    config.lr0 * 0.5 * (1.0 + (std::f64::consts::PI * progress).cos())
}

/// Gradients of the mean batch loss.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    /// Same layout as [`ClassifierState::weights`].
    pub weights: Vec<f64>,
    pub adapter: Option<AdapterGrads>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterGrads {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl AdapterGrads {
    fn zeros_like(a: &AdapterState) -> Self {
        Self {
            w1: vec![0.0; a.w1.len()],
            b1: vec![0.0; a.b1.len()],
            w2: vec![0.0; a.w2.len()],
            b2: vec![0.0; a.b2.len()],
        }
    }

    fn clear(&mut self) {
        for g in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}

impl Gradients {
    fn zeros(state: &ClassifierState, adapter: Option<&AdapterState>) -> Self {
        Self {
            weights: vec![0.0; state.weights.len()],
            adapter: adapter.map(AdapterGrads::zeros_like),
        }
    }

    fn clear(&mut self) {
        self.weights.iter_mut().for_each(|x| *x = 0.0);
        if let Some(a) = &mut self.adapter {
            a.clear();
        }
    }
}

/// Scratch buffers reused across iterations.
struct Scratch {
    scores: Vec<f64>,
    probs: Vec<f64>,
    coef: Vec<f64>,
    grad_feature: Vec<f64>,
    grad_mixed: Vec<f64>,
    grad_out_pre: Vec<f64>,
    grad_hidden: Vec<f64>,
}

impl Scratch {
    fn new(classes: usize, dim: usize, hidden: usize) -> Self {
        Self {
            scores: Vec::new(),
            probs: vec![0.0; classes],
            coef: Vec::new(),
            grad_feature: vec![0.0; dim],
            grad_mixed: vec![0.0; dim],
            grad_out_pre: vec![0.0; dim],
            grad_hidden: vec![0.0; hidden],
        }
    }
}

/// Accumulate the mean loss and its gradients over `(feature, row index)` pairs.
fn accumulate(
    state: &ClassifierState,
    adapter: Option<&AdapterState>,
    batch: &[(&[f64], usize)],
    grads: &mut Gradients,
    scratch: &mut Scratch,
) -> Result<f64> {
    let n = batch.len();
    if n == 0 {
        return Ok(0.0);
    }
    let inv_n = 1.0 / n as f64;
    let s = state.logit_scale;
    let classes = state.num_classes();
    let dim = state.dim;

    let traces: Vec<AdapterTrace> = match adapter {
        Some(a) => batch.iter().map(|(raw, _)| a.trace(raw)).collect::<Result<_>>()?,
        None => Vec::new(),
    };
    let features: Vec<&[f64]> = match adapter {
        Some(_) => traces.iter().map(|t| t.output.as_slice()).collect(),
        None => batch.iter().map(|(raw, _)| *raw).collect(),
    };
    if let Some(f) = features.iter().find(|f| f.len() != dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: f.len(),
        });
    }

    scratch.scores.resize(n * classes, 0.0);
    scratch.coef.resize(n * classes, 0.0);
    linalg::matmul_rows(&state.weights, &features, &mut scratch.scores);
    let mut loss = 0.0;
    for (i, &(_, label)) in batch.iter().enumerate() {
        let logits = &mut scratch.scores[i * classes..(i + 1) * classes];
        logits.iter_mut().for_each(|z| *z *= s);
        loss += linalg::log_sum_exp(logits) - logits[label];
        linalg::softmax(logits, &mut scratch.probs);
        let coef = &mut scratch.coef[i * classes..(i + 1) * classes];
        for c in 0..classes {
            let target = if c == label { 1.0 } else { 0.0 };
            coef[c] = (scratch.probs[c] - target) * s * inv_n;
        }
    }
    linalg::rank_update(&mut grads.weights, &features, &scratch.coef);

    if let (Some(a), Some(ga)) = (adapter, grads.adapter.as_mut()) {
        let coef = std::mem::take(&mut scratch.coef);
        for (((raw, _), t), c) in batch.iter().zip(&traces).zip(coef.chunks_exact(classes)) {
            backprop_adapter(a, t, raw, state, c, scratch, ga);
        }
        scratch.coef = coef;
    }
    Ok(loss * inv_n)
}

/// Chain rule from dL/d(output) back through normalization, the residual mix and both layers.
fn backprop_adapter(
    a: &AdapterState,
    t: &AdapterTrace,
    input: &[f64],
    state: &ClassifierState,
    coef: &[f64],
    scratch: &mut Scratch,
    ga: &mut AdapterGrads,
) {
    let dim = a.dim;
    let hidden = a.hidden;
    // dL/dz = sum_c coef_c w_c
    scratch.grad_feature.iter_mut().for_each(|x| *x = 0.0);
    for (c, row) in state.rows().enumerate() {
        linalg::axpy(coef[c], row, &mut scratch.grad_feature);
    }
    // z = m / |m|  =>  dL/dm = (g - z (z . g)) / |m|
    let zg = linalg::dot(&t.output, &scratch.grad_feature);
    for i in 0..dim {
        scratch.grad_mixed[i] = (scratch.grad_feature[i] - t.output[i] * zg) / t.mixed_norm;
    }
    // m = rho relu(o) + (1 - rho) f
    let rho = a.residual_ratio;
    for i in 0..dim {
        scratch.grad_out_pre[i] = if t.out_pre[i] > 0.0 {
            rho * scratch.grad_mixed[i]
        } else {
            0.0
        };
    }
    // o = W2 h + b2
    linalg::axpy(1.0, &scratch.grad_out_pre, &mut ga.b2);
    scratch.grad_hidden.iter_mut().for_each(|x| *x = 0.0);
    for i in 0..dim {
        let go = scratch.grad_out_pre[i];
        if go == 0.0 {
            continue;
        }
        let w2_row = &a.w2[i * hidden..(i + 1) * hidden];
        linalg::axpy(go, &t.hidden, &mut ga.w2[i * hidden..(i + 1) * hidden]);
        linalg::axpy(go, w2_row, &mut scratch.grad_hidden);
    }
    // h = relu(W1 f + b1)
    for j in 0..hidden {
        if t.hidden_pre[j] <= 0.0 {
            continue;
        }
        let gh = scratch.grad_hidden[j];
        ga.b1[j] += gh;
        linalg::axpy(gh, input, &mut ga.w1[j * dim..(j + 1) * dim]);
    }
}

fn label_indices(state: &ClassifierState, batch: &[Sample]) -> Result<Vec<usize>> {
    let index: BTreeMap<u32, usize> = state.class_ids.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    batch
        .iter()
        .map(|s| index.get(&s.class_id).copied().ok_or(Error::UnknownLabel(s.class_id)))
        .collect()
}

/// Mean cross-entropy of `softmax(logit_scale * W f)` over the batch.
pub fn ce_loss(state: &ClassifierState, batch: &[Sample]) -> Result<f64> {
    Ok(loss_and_grad(state, None, batch)?.0)
}

/// Mean loss and its gradients with respect to the classifier (and adapter, if given).
pub fn loss_and_grad(
    state: &ClassifierState,
    adapter: Option<&AdapterState>,
    batch: &[Sample],
) -> Result<(f64, Gradients)> {
    let labels = label_indices(state, batch)?;
    if let Some(a) = adapter {
        if a.dim != state.dim {
            return Err(Error::DimensionMismatch {
                expected: state.dim,
                found: a.dim,
            });
        }
    }
    let mut grads = Gradients::zeros(state, adapter);
    let mut scratch = Scratch::new(state.num_classes(), state.dim, adapter.map_or(0, |a| a.hidden));
    let pairs: Vec<(&[f64], usize)> = batch.iter().zip(labels).map(|(s, l)| (s.feature.as_slice(), l)).collect();
    let loss = accumulate(state, adapter, &pairs, &mut grads, &mut scratch)?;
    Ok((loss, grads))
}

/// Infinite stream of index batches over a mixed-modality training set.
///
/// With two or more modalities, every batch holds `ceil(B/2)` samples from the
/// primary pool and `floor(B/2)` from the auxiliary pools; the auxiliary half
/// is split evenly across auxiliary modalities in enum order, any remainder
/// going to the earlier ones. Each pool is an independently shuffled cycle,
/// reshuffled whenever it is exhausted.
#[derive(Debug, Clone)]
pub struct Batcher {
    pools: Vec<Pool>,
}

#[derive(Debug, Clone)]
struct Pool {
    modality: Modality,
    items: Vec<usize>,
    pos: usize,
    take: usize,
    rng: SplitMix64,
}

impl Pool {
    fn next_index(&mut self) -> usize {
        if self.pos == self.items.len() {
            self.rng.shuffle(&mut self.items);
            self.pos = 0;
        }
        let i = self.items[self.pos];
        self.pos += 1;
        i
    }
}

impl Batcher {
    /// Per-batch sample counts by modality, in enum order.
    pub fn composition(&self) -> Vec<(Modality, usize)> {
        self.pools.iter().map(|p| (p.modality, p.take)).collect()
    }
}

impl Iterator for Batcher {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let total = self.pools.iter().map(|p| p.take).sum();
        let mut batch = Vec::with_capacity(total);
        for pool in &mut self.pools {
            for _ in 0..pool.take {
                batch.push(pool.next_index());
            }
        }
        Some(batch)
    }
}

/// Build the batch stream for `trainset`. `primary` names the pool that gets
/// the larger half (falls back to the first modality present).
pub fn make_batches(trainset: &[Sample], batch_size: usize, seed: u64, primary: Modality) -> Result<Batcher> {
    if trainset.is_empty() {
        return Err(Error::EmptyTrainset);
    }
    if batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be positive".into()));
    }
    let mut by_modality: BTreeMap<Modality, Vec<usize>> = BTreeMap::new();
    for (i, s) in trainset.iter().enumerate() {
        by_modality.entry(s.modality).or_default().push(i);
    }
    let present: Vec<Modality> = by_modality.keys().copied().collect();
    let primary = if by_modality.contains_key(&primary) {
        primary
    } else {
        present[0]
    };
    if present.len() > 1 && batch_size < 2 {
        return Err(Error::InvalidConfig(
            "batch_size must be at least 2 with more than one modality".into(),
        ));
    }
    let mut takes: BTreeMap<Modality, usize> = BTreeMap::new();
    if present.len() == 1 {
        takes.insert(primary, batch_size);
    } else {
        takes.insert(primary, batch_size.div_ceil(2));
        let aux: Vec<Modality> = present.iter().copied().filter(|m| *m != primary).collect();
        let aux_total = batch_size / 2;
        let (base, extra) = (aux_total / aux.len(), aux_total % aux.len());
        for (k, m) in aux.iter().enumerate() {
            takes.insert(*m, base + usize::from(k < extra));
        }
    }
    let pools = by_modality
        .into_iter()
        .map(|(modality, mut items)| {
            let mut rng = SplitMix64::derive(seed, 0xBA7C_0000 + modality as u64);
            rng.shuffle(&mut items);
            Pool {
                modality,
                take: takes[&modality],
                items,
                pos: 0,
                rng,
            }
        })
        .collect();
    Ok(Batcher { pools })
}

struct ParamState {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl ParamState {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }
}

struct Optimizer {
    kind: OptimizerKind,
    weight_decay: f64,
    step: i32,
    states: Vec<ParamState>,
}

impl Optimizer {
    fn new(kind: OptimizerKind, weight_decay: f64, sizes: &[usize]) -> Self {
        Self {
            kind,
            weight_decay,
            step: 0,
            states: sizes.iter().map(|&n| ParamState::new(n)).collect(),
        }
    }

    fn begin_step(&mut self) {
        self.step += 1;
    }

    /// Update parameter group `group` in place.
    fn update(&mut self, group: usize, params: &mut [f64], grads: &[f64], lr: f64, decay: bool) {
        let wd = if decay { self.weight_decay } else { 0.0 };
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    *p -= lr * (g + wd * *p);
                }
            }
            OptimizerKind::AdamW => {
                let st = &mut self.states[group];
                let bc1 = 1.0 - ADAM_BETA1.powi(self.step);
                let bc2 = 1.0 - ADAM_BETA2.powi(self.step);
                let shrink = 1.0 - lr * wd;
                for ((p, g), (m, v)) in params
                    .iter_mut()
                    .zip(grads)
                    .zip(st.m.iter_mut().zip(st.v.iter_mut()))
                {
                    *p *= shrink;
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p -= lr * m_hat / (v_hat.sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainResult {
    #[serde(skip)]
    pub best_state: ClassifierState,
    #[serde(skip)]
    pub best_adapter: Option<AdapterState>,
    pub best_val_accuracy: f64,
    pub best_iter: usize,
    pub final_val_accuracy: f64,
    /// `(iteration, batch loss)` for every update.
    pub loss_curve: Vec<(usize, f64)>,
    /// `(iteration, validation accuracy)` at every evaluation point.
    pub val_curve: Vec<(usize, f64)>,
    pub wallclock_seconds: f64,
}

/// Precomputed labelled features with row indices into the classifier.
struct Indexed<'a> {
    samples: &'a [Sample],
    labels: Vec<usize>,
}

impl<'a> Indexed<'a> {
    fn new(state: &ClassifierState, samples: &'a [Sample]) -> Result<Self> {
        for s in samples {
            if s.feature.len() != state.dim {
                return Err(Error::DimensionMismatch {
                    expected: state.dim,
                    found: s.feature.len(),
                });
            }
        }
        Ok(Self {
            labels: label_indices(state, samples)?,
            samples,
        })
    }

    fn accuracy(&self, state: &ClassifierState, adapter: Option<&AdapterState>) -> Result<f64> {
        let adapted: Vec<Vec<f64>> = match adapter {
            Some(a) => self.samples.iter().map(|s| a.forward(&s.feature)).collect::<Result<_>>()?,
            None => Vec::new(),
        };
        let features: Vec<&[f64]> = match adapter {
            Some(_) => adapted.iter().map(Vec::as_slice).collect(),
            None => self.samples.iter().map(|s| s.feature.as_slice()).collect(),
        };
        let classes = state.num_classes();
        let mut scores = vec![0.0; features.len() * classes];
        linalg::matmul_rows(&state.weights, &features, &mut scores);
        let correct = scores
            .chunks_exact(classes)
            .zip(&self.labels)
            .filter(|(row, &label)| linalg::argmax(row) == label)
            .count();
        Ok(correct as f64 / self.samples.len() as f64)
    }
}

/// Train from `init` and return the checkpoint with the best validation accuracy.
///
/// Validation runs before the first update, every `eval_every` updates, and
/// after the last update; ties keep the earliest checkpoint. The primary pool
/// for batching is the modality of the validation samples.
pub fn train(
    config: &TrainConfig,
    trainset: &[Sample],
    valset: &[Sample],
    init: &ClassifierState,
    adapter_init: Option<&AdapterState>,
) -> Result<TrainResult> {
    let started = Instant::now();
    config.validate()?;
    init.validate()?;
    if valset.is_empty() {
        return Err(Error::InvalidConfig("validation set is empty".into()));
    }
    let mut state = init.clone();
    state.logit_scale = config.logit_scale;
    let mut adapter = match (config.adapter_enabled, adapter_init) {
        (true, Some(a)) => {
            a.validate()?;
            if a.dim != state.dim {
                return Err(Error::DimensionMismatch {
                    expected: state.dim,
                    found: a.dim,
                });
            }
            Some(a.clone())
        }
        (true, None) => Some(AdapterState::random(state.dim, config.residual_ratio, config.seed)),
        (false, _) => None,
    };

    let val = Indexed::new(&state, valset)?;
    let initial_acc = val.accuracy(&state, adapter.as_ref())?;
    let mut best = (initial_acc, 0usize, state.clone(), adapter.clone());
    let mut val_curve = vec![(0, initial_acc)];
    let mut loss_curve = Vec::with_capacity(config.max_iters);
    let mut final_acc = initial_acc;

    if config.max_iters > 0 {
        let train = Indexed::new(&state, trainset)?;
        let primary = valset[0].modality;
        let mut batches = make_batches(trainset, config.batch_size, config.seed, primary)?;
        let mut grads = Gradients::zeros(&state, adapter.as_ref());
        let mut scratch = Scratch::new(state.num_classes(), state.dim, adapter.as_ref().map_or(0, |a| a.hidden));
        let sizes: Vec<usize> = match &adapter {
            Some(a) => vec![state.weights.len(), a.w1.len(), a.b1.len(), a.w2.len(), a.b2.len()],
            None => vec![state.weights.len()],
        };
        let mut opt = Optimizer::new(config.optimizer, config.weight_decay, &sizes);

        for t in 0..config.max_iters {
            let lr = lr_at(config, t);
            let batch = batches.next().expect("batch stream is infinite");
            grads.clear();
            let pairs: Vec<(&[f64], usize)> = batch
                .iter()
                .map(|&i| (train.samples[i].feature.as_slice(), train.labels[i]))
                .collect();
            let loss = accumulate(&state, adapter.as_ref(), &pairs, &mut grads, &mut scratch)?;
            loss_curve.push((t, loss));

            opt.begin_step();
            opt.update(0, &mut state.weights, &grads.weights, lr, true);
            if let (Some(a), Some(ga)) = (adapter.as_mut(), grads.adapter.as_ref()) {
                opt.update(1, &mut a.w1, &ga.w1, lr, true);
                opt.update(2, &mut a.b1, &ga.b1, lr, false);
                opt.update(3, &mut a.w2, &ga.w2, lr, true);
                opt.update(4, &mut a.b2, &ga.b2, lr, false);
            }

            let done = t + 1;
            if done % config.eval_every == 0 || done == config.max_iters {
                let acc = val.accuracy(&state, adapter.as_ref())?;
                val_curve.push((done, acc));
                final_acc = acc;
                if acc > best.0 {
                    best = (acc, done, state.clone(), adapter.clone());
                }
            }
        }
        if state.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidConfig("training diverged (non-finite weights)".into()));
        }
    }

    let (best_val_accuracy, best_iter, best_state, best_adapter) = best;
    Ok(TrainResult {
        best_state,
        best_adapter,
        best_val_accuracy,
        best_iter,
        final_val_accuracy: final_acc,
        loss_curve,
        val_curve,
        wallclock_seconds: started.elapsed().as_secs_f64(),
    })
}

/// Learning rate, weight decay and batch size values to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lrs: Vec<f64>,
    pub weight_decays: Vec<f64>,
    pub batch_sizes: Vec<usize>,
}

impl Grid {
    /// Linear probing: 2 x 3 x 2 = 12 points.
    pub fn linear_default() -> Self {
        Self {
            lrs: vec![1e-3, 1e-4],
            weight_decays: vec![0.0, 0.01, 1e-4],
            batch_sizes: vec![8, 32],
        }
    }

    /// Adapter: 4 x 3 x 1 = 12 points.
    pub fn adapter_default() -> Self {
        Self {
            lrs: vec![1e-4, 1e-5, 1e-6, 1e-7],
            weight_decays: vec![0.0, 1e-3, 1e-5],
            batch_sizes: vec![8],
        }
    }

    /// Audiovisual linear probing: 4 x 3 x 1 = 12 points.
    pub fn esc_default() -> Self {
        Self {
            lrs: vec![0.1, 0.01, 1e-3, 1e-4],
            weight_decays: vec![0.0, 0.01, 1e-4],
            batch_sizes: vec![8],
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "linear-default" => Some(Self::linear_default()),
            "adapter-default" => Some(Self::adapter_default()),
            "esc-default" => Some(Self::esc_default()),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.lrs.len() * self.weight_decays.len() * self.batch_sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Configs in lr-major, then weight decay, then batch size order.
    pub fn points(&self, base: &TrainConfig) -> Vec<TrainConfig> {
        let mut out = Vec::with_capacity(self.len());
        for &lr0 in &self.lrs {
            for &weight_decay in &self.weight_decays {
                for &batch_size in &self.batch_sizes {
                    out.push(TrainConfig {
                        lr0,
                        weight_decay,
                        batch_size,
                        ..base.clone()
                    });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub best_config: TrainConfig,
    pub best_result: TrainResult,
    /// Every grid point with its best validation accuracy, in grid order.
    pub points: Vec<(TrainConfig, f64)>,
}

/// Train every grid point and keep the highest validation accuracy (earliest point on ties).
pub fn grid_search(
    grid: &Grid,
    base: &TrainConfig,
    trainset: &[Sample],
    valset: &[Sample],
    init: &ClassifierState,
    adapter_init: Option<&AdapterState>,
    exec: Exec,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let configs = grid.points(base);
    let results = par::try_map(exec, &configs, |cfg| train(cfg, trainset, valset, init, adapter_init))?;
    let mut best = 0;
    for (i, r) in results.iter().enumerate() {
        if r.best_val_accuracy > results[best].best_val_accuracy {
            best = i;
        }
    }
    let points = configs
        .iter()
        .cloned()
        .zip(results.iter().map(|r| r.best_val_accuracy))
        .collect();
    let best_config = configs[best].clone();
    let best_result = results.into_iter().nth(best).expect("best index in range");
    Ok(GridSearchResult {
        best_config,
        best_result,
        points,
    })
}
