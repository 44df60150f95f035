//! Metrics, distribution-shift evaluation, PCA figures and result tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{adapt, AdapterState, ClassifierState};
use crate::store::{FeatureStore, Modality, Sample};

/// Fraction of `test` samples whose prediction equals their label.
pub fn top1_accuracy(state: &ClassifierState, adapter: Option<&AdapterState>, test: &[Sample]) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut correct = 0usize;
    for s in test {
        let label = state.index_of(s.class_id).ok_or(Error::UnknownLabel(s.class_id))?;
        if state.predict_index(&adapt(adapter, &s.feature)?)? == label {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Accuracy when only the rows in `allowed` may be predicted (lowest index wins ties).
fn masked_accuracy(
    state: &ClassifierState,
    adapter: Option<&AdapterState>,
    test: &[(Vec<f64>, usize)],
    allowed: &BTreeSet<usize>,
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let mut correct = 0usize;
    for (feature, label) in test {
        let scores = state.scores(&adapt(adapter, feature)?)?;
        let mut best: Option<usize> = None;
        for &i in allowed {
            if best.is_none_or(|b| scores[i] > scores[b]) {
                best = Some(i);
            }
        }
        if best == Some(*label) {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}

/// Maps a target store's class ids onto classifier class ids. Target classes
/// absent from the table are dropped from evaluation.
pub type RemapTable = BTreeMap<u32, u32>;

pub fn load_remap(path: &Path) -> Result<RemapTable> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

#[derive(Debug, Clone)]
pub struct ShiftedTarget<'a> {
    pub name: String,
    pub store: &'a FeatureStore,
    pub remap: Option<RemapTable>,
}

/// Labels attached to every report row produced by one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RowContext {
    pub method: String,
    pub shots: usize,
    pub seed: u64,
}

/// Evaluate one fixed classifier on a source test set and any number of shifted test sets.
pub fn eval_shifted(
    state: &ClassifierState,
    adapter: Option<&AdapterState>,
    source_name: &str,
    source: &FeatureStore,
    targets: &[ShiftedTarget<'_>],
    modality: Modality,
    ctx: &RowContext,
) -> Result<Vec<ReportRow>> {
    let row = |dataset: &str, accuracy: f64| ReportRow {
        dataset: dataset.to_string(),
        method: ctx.method.clone(),
        shots: ctx.shots,
        seed: ctx.seed,
        accuracy,
        seconds: None,
    };
    let mut rows = vec![row(
        source_name,
        top1_accuracy(state, adapter, &source.evaluation_samples(modality)?)?,
    )];
    for target in targets {
        let samples = target.store.evaluation_samples(modality)?;
        let accuracy = match &target.remap {
            None => {
                for class_id in samples.iter().map(|s| s.class_id).collect::<BTreeSet<_>>() {
                    let name = target.store.class_name(class_id);
                    if state.index_of(class_id).is_none() || name != source.class_name(class_id) {
                        return Err(Error::ClassVocabularyMismatch(format!(
                            "{}: class {class_id} ({}) has no counterpart; supply a remap table",
                            target.name,
                            name.unwrap_or("?")
                        )));
                    }
                }
                top1_accuracy(state, adapter, &samples)?
            }
            Some(remap) => {
                let mut allowed = BTreeSet::new();
                for (&from, &to) in remap {
                    let row = state.index_of(to).ok_or_else(|| {
                        Error::ClassVocabularyMismatch(format!(
                            "{}: remap sends class {from} to unknown classifier class {to}",
                            target.name
                        ))
                    })?;
                    allowed.insert(row);
                }
                let test: Vec<(Vec<f64>, usize)> = samples
                    .into_iter()
                    .filter_map(|s| {
                        let to = *remap.get(&s.class_id)?;
                        Some((s.feature, state.index_of(to)?))
                    })
                    .collect();
                masked_accuracy(state, adapter, &test, &allowed)?
            }
        };
        rows.push(row(&target.name, accuracy));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub method: String,
    pub shots: usize,
    pub seed: u64,
    /// Fraction in `[0, 1]`.
    pub accuracy: f64,
    #[serde(default)]
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub dataset: String,
    pub method: String,
    pub shots: usize,
    pub runs: usize,
    pub mean: f64,
    /// Sample standard deviation; zero for a single run.
    pub std: f64,
    pub seconds: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<ReportRow>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

impl EvalReport {
    pub fn new(rows: Vec<ReportRow>) -> Self {
        Self { rows }
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = ReportRow>) {
        self.rows.extend(rows);
    }

    /// Mean and std across seeds per `(dataset, method, shots)`, in first-appearance order.
    pub fn aggregates(&self) -> Vec<Aggregate> {
        let mut order: Vec<(String, String, usize)> = Vec::new();
        let mut groups: BTreeMap<(String, String, usize), Vec<&ReportRow>> = BTreeMap::new();
        for r in &self.rows {
            let key = (r.dataset.clone(), r.method.clone(), r.shots);
            let group = groups.entry(key.clone()).or_default();
            if group.is_empty() {
                order.push(key);
            }
            group.push(r);
        }
        order
            .into_iter()
            .map(|key| {
                let rows = &groups[&key];
                let accs: Vec<f64> = rows.iter().map(|r| r.accuracy).collect();
                let (mean, std) = mean_std(&accs);
                let secs: Option<Vec<f64>> = rows.iter().map(|r| r.seconds).collect();
                Aggregate {
                    dataset: key.0,
                    method: key.1,
                    shots: key.2,
                    runs: rows.len(),
                    mean,
                    std,
                    seconds: secs.map(|s| mean_std(&s).0),
                }
            })
            .collect()
    }

    pub fn render(&self, format: ReportFormat) -> Result<String> {
        if self.rows.is_empty() {
            return Err(Error::EmptyReport);
        }
        let cells: Vec<[String; 6]> = self
            .aggregates()
            .into_iter()
            .map(|a| {
                [
                    a.dataset,
                    a.method,
                    a.shots.to_string(),
                    format!("{:.2}", 100.0 * a.mean),
                    format!("{:.2}", 100.0 * a.std),
                    a.seconds.map(|s| format!("{s:.2}")).unwrap_or_default(),
                ]
            })
            .collect();
        const HEADER: [&str; 6] = ["dataset", "method", "shots", "mean", "std", "seconds"];
        let mut out = String::new();
        match format {
            ReportFormat::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(HEADER).map_err(csv_err)?;
                for c in &cells {
                    w.write_record(c).map_err(csv_err)?;
                }
                out = String::from_utf8(w.into_inner().map_err(|e| csv_err(e.into_error().into()))?)
                    .expect("csv output is utf-8");
            }
            ReportFormat::Markdown => {
                let _ = writeln!(out, "| {} |", HEADER.join(" | "));
                let _ = writeln!(out, "|---|---|---:|---:|---:|---:|");
                for c in &cells {
                    let escaped: Vec<String> = c.iter().map(|x| x.replace('|', "\\|")).collect();
                    let _ = writeln!(out, "| {} |", escaped.join(" | "));
                }
            }
        }
        Ok(out)
    }

    pub fn emit(&self, format: ReportFormat, path: &Path) -> Result<()> {
        let text = self.render(format)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Raw per-run rows at full precision (`dataset,method,shots,seed,accuracy,seconds`).
    pub fn write_rows(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| Error::io(path, csv_io(e)))?;
        for r in &self.rows {
            w.serialize(r).map_err(|e| Error::io(path, csv_io(e)))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_rows(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| Error::io(path, csv_io(e)))?;
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<ReportRow>, _>>()
            .map_err(|e| Error::io(path, csv_io(e)))?;
        Ok(Self { rows })
    }
}

fn csv_io(e: csv::Error) -> std::io::Error {
    std::io::Error::new(std::io::ErrorKind::InvalidData, e)
}

fn csv_err(e: csv::Error) -> Error {
    Error::io(PathBuf::from("<report>"), csv_io(e))
}

/// Top two principal directions of a point set.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    pub mean: Vec<f64>,
    pub components: [Vec<f64>; 2],
    /// Variance of the points along each component.
    pub variances: [f64; 2],
}

impl Pca {
    /// Eigen-decomposition of the covariance. Each component's largest-magnitude
    /// coordinate is made positive so figures are reproducible.
    pub fn fit(points: &[Vec<f64>]) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::DegenerateCovariance);
        }
        let d = points[0].len();
        if let Some(p) = points.iter().find(|p| p.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: p.len(),
            });
        }
        if d < 2 {
            return Err(Error::DegenerateCovariance);
        }
        let n = points.len() as f64;
        let mut mean = vec![0.0; d];
        for p in points {
            linalg::axpy(1.0 / n, p, &mut mean);
        }
        let centered = DMatrix::from_fn(points.len(), d, |i, j| points[i][j] - mean[j]);
        let cov = (centered.transpose() * &centered) / (n - 1.0);
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
        let top = eig.eigenvalues[order[0]];
        if !(top > 1e-15 * (1.0 + mean.iter().map(|m| m * m).sum::<f64>())) {
            return Err(Error::DegenerateCovariance);
        }
        let component = |k: usize| -> Vec<f64> {
            let mut v: Vec<f64> = eig.eigenvectors.column(order[k]).iter().copied().collect();
            let lead = linalg::argmax(&v.iter().map(|x| x.abs()).collect::<Vec<_>>());
            if v[lead] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        };
        Ok(Self {
            components: [component(0), component(1)],
            variances: [top, eig.eigenvalues[order[1]].max(0.0)],
            mean,
        })
    }

    pub fn project(&self, x: &[f64]) -> (f64, f64) {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, m)| a - m).collect();
        (
            linalg::dot(&centered, &self.components[0]),
            linalg::dot(&centered, &self.components[1]),
        )
    }

    pub fn reconstruct(&self, x: f64, y: f64) -> Vec<f64> {
        let mut out = self.mean.clone();
        linalg::axpy(x, &self.components[0], &mut out);
        linalg::axpy(y, &self.components[1], &mut out);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigurePoint {
    pub x: f64,
    pub y: f64,
    pub class: u32,
    pub modality: Modality,
}

/// The line `a x + b y + c = 0` in principal-component coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaFigure {
    pub points: Vec<FigurePoint>,
    pub boundary: Option<Line>,
}

/// Project features onto their top two principal components and, for a
/// two-class classifier, the decision line `(w_0 - w_1) . x = 0` restricted
/// to the component plane.
pub fn pca_projection(features: &[Sample], state: &ClassifierState) -> Result<PcaFigure> {
    let vectors: Vec<Vec<f64>> = features.iter().map(|s| s.feature.clone()).collect();
    let pca = Pca::fit(&vectors)?;
    let points = features
        .iter()
        .map(|s| {
            let (x, y) = pca.project(&s.feature);
            FigurePoint {
                x,
                y,
                class: s.class_id,
                modality: s.modality,
            }
        })
        .collect();
    let boundary = if state.num_classes() == 2 {
        if state.dim != pca.mean.len() {
            return Err(Error::DimensionMismatch {
                expected: state.dim,
                found: pca.mean.len(),
            });
        }
        let delta: Vec<f64> = state.row(0).iter().zip(state.row(1)).map(|(a, b)| a - b).collect();
        let line = Line {
            a: linalg::dot(&delta, &pca.components[0]),
            b: linalg::dot(&delta, &pca.components[1]),
            c: linalg::dot(&delta, &pca.mean),
        };
        (line.a.hypot(line.b) > 1e-12).then_some(line)
    } else {
        None
    };
    Ok(PcaFigure { points, boundary })
}

/// Write `out` (SVG) and a JSON sidecar with the raw projected coordinates.
pub fn pca_figure(features: &[Sample], state: &ClassifierState, out: &Path) -> Result<PcaFigure> {
    let fig = pca_projection(features, state)?;
    fs::write(out, render_svg(&fig)).map_err(|e| Error::io(out, e))?;
    let sidecar = out.with_extension("json");
    let json = serde_json::to_string_pretty(&fig).map_err(|e| Error::json(&sidecar, e))?;
    fs::write(&sidecar, json + "\n").map_err(|e| Error::io(&sidecar, e))?;
    Ok(fig)
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Minimal standalone SVG: circles for images, squares for text, triangles for audio.
pub fn render_svg(fig: &PcaFigure) -> String {
    const SIZE: f64 = 480.0;
    const MARGIN: f64 = 32.0;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &fig.points {
        x0 = x0.min(p.x);
        x1 = x1.max(p.x);
        y0 = y0.min(p.y);
        y1 = y1.max(p.y);
    }
    let pad = 0.05 * (x1 - x0).max(y1 - y0).max(1e-9);
    let (x0, x1, y0, y1) = (x0 - pad, x1 + pad, y0 - pad, y1 + pad);
    let span = (x1 - x0).max(y1 - y0);
    let sx = |x: f64| MARGIN + (x - x0) / span * (SIZE - 2.0 * MARGIN);
    let sy = |y: f64| SIZE - MARGIN - (y - y0) / span * (SIZE - 2.0 * MARGIN);

    let mut classes: Vec<u32> = fig.points.iter().map(|p| p.class).collect();
    classes.sort_unstable();
    classes.dedup();
    let color = |c: u32| PALETTE[classes.binary_search(&c).unwrap_or(0) % PALETTE.len()];

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(
        svg,
        r##"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="#333">PC1</text>"##,
        SIZE / 2.0,
        SIZE - 8.0
    );
    let _ = writeln!(
        svg,
        r##"<text x="6" y="{}" font-family="sans-serif" font-size="12" fill="#333">PC2</text>"##,
        SIZE / 2.0
    );

    if let Some(line) = fig.boundary {
        if let Some(((ax, ay), (bx, by))) = clip_line(line, x0, x1, y0, y1) {
            let _ = writeln!(
                svg,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#000" stroke-width="1.5" stroke-dasharray="6 4"/>"##,
                sx(ax),
                sy(ay),
                sx(bx),
                sy(by)
            );
        }
    }
    for p in &fig.points {
        let (cx, cy, fill) = (sx(p.x), sy(p.y), color(p.class));
        let _ = match p.modality {
            Modality::Image => writeln!(svg, r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="5" fill="{fill}"/>"#),
            Modality::Text => writeln!(
                svg,
                r##"<rect x="{:.2}" y="{:.2}" width="11" height="11" fill="{fill}" stroke="#000"/>"##,
                cx - 5.5,
                cy - 5.5
            ),
            Modality::Audio => writeln!(
                svg,
                r##"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="{fill}" stroke="#000"/>"##,
                cx,
                cy - 7.0,
                cx - 6.0,
                cy + 5.0,
                cx + 6.0,
                cy + 5.0
            ),
        };
    }
    svg.push_str("</svg>\n");
    svg
}

/// Segment of `a x + b y + c = 0` inside the box, if it crosses it.
fn clip_line(l: Line, x0: f64, x1: f64, y0: f64, y1: f64) -> Option<((f64, f64), (f64, f64))> {
    let mut hits: Vec<(f64, f64)> = Vec::new();
    if l.b.abs() > 1e-300 {
        for x in [x0, x1] {
            let y = -(l.a * x + l.c) / l.b;
            if (y0..=y1).contains(&y) {
                hits.push((x, y));
            }
        }
    }
    if l.a.abs() > 1e-300 {
        for y in [y0, y1] {
            let x = -(l.b * y + l.c) / l.a;
            if (x0..=x1).contains(&x) {
                hits.push((x, y));
            }
        }
    }
    hits.dedup_by(|p, q| (p.0 - q.0).abs() < 1e-12 && (p.1 - q.1).abs() < 1e-12);
    (hits.len() >= 2).then(|| (hits[0], hits[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store::{FeatureRecord, Manifest};

    fn e(i: usize, d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    fn one_hot_classifier(c: usize) -> ClassifierState {
        let rows: Vec<Vec<f64>> = (0..c).map(|i| e(i, c)).collect();
        ClassifierState::from_rows((0..c as u32).collect(), &rows, 100.0).unwrap()
    }

    #[test]
    fn perfect_accuracy_on_class_directions() {
        let state = one_hot_classifier(3);
        let test: Vec<Sample> = (0..3).map(|i| Sample::new(i as u32, Modality::Image, e(i, 3))).collect();
        assert_eq!(top1_accuracy(&state, None, &test).unwrap(), 1.0);
    }

    #[test]
    fn three_of_four_correct() {
        let state = one_hot_classifier(2);
        let test = vec![
            Sample::new(0, Modality::Image, e(0, 2)),
            Sample::new(1, Modality::Image, e(1, 2)),
            Sample::new(0, Modality::Image, e(0, 2)),
            Sample::new(0, Modality::Image, e(1, 2)),
        ];
        assert_eq!(top1_accuracy(&state, None, &test).unwrap(), 0.75);
    }

    #[test]
    fn empty_test_set_rejected() {
        assert!(matches!(top1_accuracy(&one_hot_classifier(2), None, &[]), Err(Error::EmptyTestSet)));
    }

    fn store_with(classes: &[(u32, &str)], samples: &[(u32, Vec<f32>)]) -> FeatureStore {
        let mut s = FeatureStore::new(samples[0].1.len(), Manifest::default());
        for (id, name) in classes {
            s.manifest.classes.insert(*id, name.to_string());
        }
        for (i, (c, v)) in samples.iter().enumerate() {
            s.records.push(FeatureRecord {
                sample_id: i as u32,
                class_id: *c,
                modality: Modality::Image,
                view_id: 0,
                vector: v.clone(),
            });
        }
        s
    }

    fn ctx() -> RowContext {
        RowContext {
            method: "m".into(),
            shots: 1,
            seed: 1,
        }
    }

    #[test]
    fn shifted_eval_with_identical_target() {
        let state = one_hot_classifier(3);
        let src = store_with(
            &[(0, "a"), (1, "b"), (2, "c")],
            &[(0, vec![1.0, 0.1, 0.0]), (1, vec![0.0, 1.0, 0.0]), (2, vec![0.9, 0.0, 0.1])],
        );
        let targets = vec![
            ShiftedTarget { name: "v2".into(), store: &src, remap: None },
            ShiftedTarget { name: "r".into(), store: &src, remap: None },
            ShiftedTarget { name: "s".into(), store: &src, remap: None },
            ShiftedTarget { name: "a".into(), store: &src, remap: None },
        ];
        let rows = eval_shifted(&state, None, "src", &src, &targets, Modality::Image, &ctx()).unwrap();
        assert_eq!(rows.len(), 5);
        let direct = top1_accuracy(&state, None, &src.evaluation_samples(Modality::Image).unwrap()).unwrap();
        assert!(rows.iter().all(|r| r.accuracy == direct));
    }

    #[test]
    fn shifted_eval_requires_remap_for_foreign_vocabulary() {
        let state = one_hot_classifier(3);
        let src = store_with(&[(0, "a"), (1, "b"), (2, "c")], &[(0, vec![1.0, 0.0, 0.0])]);
        let tgt = store_with(&[(0, "zebra")], &[(0, vec![1.0, 0.0, 0.0])]);
        let targets = [ShiftedTarget { name: "t".into(), store: &tgt, remap: None }];
        let err = eval_shifted(&state, None, "src", &src, &targets, Modality::Image, &ctx()).unwrap_err();
        assert!(matches!(err, Error::ClassVocabularyMismatch(_)));
    }

    #[test]
    fn remap_masks_logits_to_mapped_rows() {
        // Class 2 would win unmasked, but only rows 0 and 1 are mapped.
        let state = one_hot_classifier(3);
        let src = store_with(&[(0, "a"), (1, "b"), (2, "c")], &[(0, vec![1.0, 0.0, 0.0])]);
        let tgt = store_with(
            &[(10, "a"), (11, "b"), (12, "x")],
            &[(10, vec![0.5, 0.1, 0.9]), (11, vec![0.1, 0.5, 0.9]), (12, vec![0.0, 0.0, 1.0])],
        );
        let remap = RemapTable::from([(10, 0), (11, 1)]);
        let targets = [ShiftedTarget { name: "t".into(), store: &tgt, remap: Some(remap) }];
        let rows = eval_shifted(&state, None, "src", &src, &targets, Modality::Image, &ctx()).unwrap();
        assert_eq!(rows[1].accuracy, 1.0);
    }

    fn row(seed: u64, acc: f64) -> ReportRow {
        ReportRow {
            dataset: "pets".into(),
            method: "cross-modal".into(),
            shots: 1,
            seed,
            accuracy: acc,
            seconds: None,
        }
    }

    #[test]
    fn aggregate_mean_and_sample_std() {
        let report = EvalReport::new(vec![row(1, 0.5), row(2, 0.6), row(3, 0.7)]);
        let agg = report.aggregates();
        assert_eq!(agg.len(), 1);
        assert!((agg[0].mean - 0.6).abs() < 1e-12);
        assert!((agg[0].std - 0.1).abs() < 1e-12);
    }

    #[test]
    fn single_row_renders_one_line() {
        let report = EvalReport::new(vec![row(1, 0.8876)]);
        let csv = report.render(ReportFormat::Csv).unwrap();
        assert_eq!(csv, "dataset,method,shots,mean,std,seconds\npets,cross-modal,1,88.76,0.00,\n");
    }

    #[test]
    fn markdown_and_csv_agree() {
        let mut rows = vec![row(1, 0.5), row(2, 0.6)];
        rows.push(ReportRow { shots: 2, ..row(1, 0.9) });
        let report = EvalReport::new(rows);
        let csv = report.render(ReportFormat::Csv).unwrap();
        let md = report.render(ReportFormat::Markdown).unwrap();
        let csv_vals: Vec<Vec<String>> =
            csv.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
        let md_vals: Vec<Vec<String>> = md
            .lines()
            .skip(2)
            .map(|l| l.trim_matches('|').split('|').map(|c| c.trim().to_string()).collect())
            .collect();
        assert_eq!(csv_vals, md_vals);
    }

    #[test]
    fn empty_report_rejected() {
        assert!(matches!(EvalReport::default().render(ReportFormat::Csv), Err(Error::EmptyReport)));
    }

    #[test]
    fn rows_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rows.csv");
        let mut r = row(4, 0.123456789012345);
        r.seconds = Some(1.5);
        let report = EvalReport::new(vec![r, row(5, 1.0)]);
        report.write_rows(&p).unwrap();
        assert_eq!(EvalReport::read_rows(&p).unwrap(), report);
    }

    #[test]
    fn pca_finds_displacement_axis() {
        let mut pts = Vec::new();
        for i in 0..10 {
            let jitter = 0.01 * (i as f64 - 4.5);
            pts.push(vec![3.0, jitter, 0.02 * jitter, 0.0]);
            pts.push(vec![-3.0, -jitter, 0.0, 0.01 * jitter]);
        }
        let pca = Pca::fit(&pts).unwrap();
        assert!(pca.components[0][0].abs() >= 0.99);
        assert!(pca.components[0][0] > 0.0, "sign convention");
        assert!(pca.variances[0] >= pca.variances[1]);
    }

    #[test]
    fn pca_rejects_identical_points() {
        let pts = vec![vec![1.0, 2.0]; 5];
        assert!(matches!(Pca::fit(&pts), Err(Error::DegenerateCovariance)));
    }

    #[test]
    fn pca_figure_writes_svg_and_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("fig.svg");
        let state = ClassifierState::from_rows(vec![0, 1], &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]], 100.0)
            .unwrap();
        let feats = vec![
            Sample::new(0, Modality::Image, vec![1.0, 0.1, 0.0]),
            Sample::new(0, Modality::Text, vec![0.9, 0.0, 0.2]),
            Sample::new(1, Modality::Image, vec![0.1, 1.0, 0.0]),
            Sample::new(1, Modality::Audio, vec![0.0, 0.8, 0.3]),
        ];
        let fig = pca_figure(&feats, &state, &out).unwrap();
        assert!(fig.boundary.is_some());
        let svg = fs::read_to_string(&out).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("<line") && svg.contains("<polygon"));
        let side: PcaFigure = serde_json::from_str(&fs::read_to_string(dir.path().join("fig.json")).unwrap()).unwrap();
        assert_eq!(side, fig);
    }
}
