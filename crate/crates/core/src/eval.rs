//! Accuracy over all classes seen so far, Avg/Last summaries, multi-seed
//! aggregation and the metric file formats.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{ClassId, Sample};
use crate::error::{Error, Result};
use crate::learner::Learner;
use crate::nn::{batch_matrix, Classifier};

/// Anything that scores inputs against a list of classes.
pub trait Predictor {
    /// Class ids matching the score columns.
    fn classes(&self) -> &[ClassId];
    fn class_scores(&self, x: &Array2<f64>) -> Result<Array2<f64>>;
}

impl Predictor for Learner {
    fn classes(&self) -> &[ClassId] {
        Learner::classes(self)
    }

    fn class_scores(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Learner::class_scores(self, x)
    }
}

/// A bare classifier whose head `i` predicts `classes[i]`.
pub struct ModelPredictor<'a> {
    pub model: &'a Classifier,
    pub classes: &'a [ClassId],
}

impl Predictor for ModelPredictor<'_> {
    fn classes(&self) -> &[ClassId] {
        self.classes
    }

    fn class_scores(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.model.forward(x)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Fraction of all test samples.
    #[default]
    Micro,
    /// Mean of per-class accuracies.
    Macro,
}

/// Whether `col` is among the `k` highest entries of `row` (ties favour the
/// lower column).
fn in_top_k(row: ndarray::ArrayView1<f64>, col: usize, k: usize) -> bool {
    let target = row[col];
    let better = row
        .iter()
        .enumerate()
        .filter(|&(j, &v)| v > target || (v == target && j < col))
        .count();
    better < k
}

/// Top-k accuracy of `predictor` on `test`.
pub fn evaluate_step<P: Predictor + ?Sized>(
    predictor: &P,
    test: &[Sample],
    top_k: usize,
    averaging: Averaging,
) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::InvalidEval("empty test set".into()));
    }
    if top_k == 0 {
        return Err(Error::InvalidEval("top_k must be at least 1".into()));
    }
    let classes = predictor.classes();
    let col_of: BTreeMap<ClassId, usize> = classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let scores = predictor.class_scores(&batch_matrix(test)?)?;
    if scores.ncols() != classes.len() {
        return Err(Error::Shape(format!(
            "{} score columns for {} classes",
            scores.ncols(),
            classes.len()
        )));
    }
    let mut per_class: BTreeMap<ClassId, (usize, usize)> = BTreeMap::new();
    for (r, s) in test.iter().enumerate() {
        let col = *col_of
            .get(&s.label)
            .ok_or_else(|| Error::InvalidEval(format!("test label {} was never learned", s.label)))?;
        let hit = top_k >= classes.len() || in_top_k(scores.row(r), col, top_k);
        let e = per_class.entry(s.label).or_default();
        e.0 += usize::from(hit);
        e.1 += 1;
    }
    Ok(match averaging {
        Averaging::Micro => {
            let hits: usize = per_class.values().map(|e| e.0).sum();
            hits as f64 / test.len() as f64
        }
        Averaging::Macro => {
            per_class.values().map(|&(h, n)| h as f64 / n as f64).sum::<f64>() / per_class.len() as f64
        }
    })
}

/// `(avg, last)`. With `include_initial == false` the first entry is left
/// out of the average (it is kept when it is the only one).
pub fn summarize(per_step: &[f64], include_initial: bool) -> Result<(f64, f64)> {
    let last = *per_step
        .last()
        .ok_or_else(|| Error::InvalidEval("no per-step accuracies".into()))?;
    let body = if include_initial || per_step.len() == 1 {
        per_step
    } else {
        &per_step[1..]
    };
    Ok((body.iter().sum::<f64>() / body.len() as f64, last))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub method: String,
    pub seed: u64,
    pub top_k: usize,
    pub include_initial: bool,
    pub per_step_accuracy: Vec<f64>,
    pub avg: f64,
    pub last: f64,
}

impl RunMetrics {
    pub fn new(method: impl Into<String>, seed: u64, top_k: usize, include_initial: bool, per_step: Vec<f64>) -> Result<Self> {
        if per_step.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidEval("accuracy outside [0, 1]".into()));
        }
        let (avg, last) = summarize(&per_step, include_initial)?;
        Ok(Self {
            method: method.into(),
            seed,
            top_k,
            include_initial,
            per_step_accuracy: per_step,
            avg,
            last,
        })
    }

    /// Whether the stored summaries agree with the per-step entries.
    pub fn is_consistent(&self) -> bool {
        summarize(&self.per_step_accuracy, self.include_initial)
            .map(|(a, l)| a == self.avg && l == self.last)
            .unwrap_or(false)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; zero for a single run.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedAggregate {
    pub method: String,
    pub runs: usize,
    pub per_step: Vec<MeanStd>,
    pub avg: MeanStd,
    pub last: MeanStd,
}

/// Mean and standard deviation per step and per summary across runs of one
/// method. Runs must have equally many steps.
pub fn aggregate_seeds(runs: &[RunMetrics]) -> Result<SeedAggregate> {
    let first = runs
        .first()
        .ok_or_else(|| Error::InvalidEval("no runs to aggregate".into()))?;
    let steps = first.per_step_accuracy.len();
    if runs.iter().any(|r| r.per_step_accuracy.len() != steps) {
        return Err(Error::InvalidEval("runs differ in step count".into()));
    }
    let per_step = (0..steps)
        .map(|k| MeanStd::of(&runs.iter().map(|r| r.per_step_accuracy[k]).collect::<Vec<_>>()))
        .collect();
    Ok(SeedAggregate {
        method: first.method.clone(),
        runs: runs.len(),
        per_step,
        avg: MeanStd::of(&runs.iter().map(|r| r.avg).collect::<Vec<_>>()),
        last: MeanStd::of(&runs.iter().map(|r| r.last).collect::<Vec<_>>()),
    })
}

/// Groups runs by method (first-appearance order) and aggregates each.
pub fn aggregate_by_method(runs: &[RunMetrics]) -> Result<Vec<SeedAggregate>> {
    let mut order: Vec<&str> = Vec::new();
    for r in runs {
        if !order.contains(&r.method.as_str()) {
            order.push(&r.method);
        }
    }
    order
        .into_iter()
        .map(|m| {
            let group: Vec<RunMetrics> = runs.iter().filter(|r| r.method == m).cloned().collect();
            aggregate_seeds(&group)
        })
        .collect()
}

/// `method,seed,step,accuracy` with a header row.
pub fn write_metrics_csv(path: impl AsRef<Path>, runs: &[RunMetrics]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "method,seed,step,accuracy")?;
    for r in runs {
        for (k, a) in r.per_step_accuracy.iter().enumerate() {
            writeln!(out, "{},{},{},{}", r.method, r.seed, k, a)?;
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub method: String,
    pub seed: u64,
    pub step: usize,
    pub accuracy: f64,
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricRow>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        path: path.into(),
        line: 0,
        msg: e.to_string(),
    })?;
    reader
        .deserialize()
        .map(|row| {
            row.map_err(|e| Error::Parse {
                path: path.into(),
                line: e.position().map_or(0, |p| p.line()),
                msg: e.to_string(),
            })
        })
        .collect()
}

/// Rebuilds run records from CSV rows (summaries recomputed).
pub fn runs_from_rows(rows: &[MetricRow], top_k: usize, include_initial: bool) -> Result<Vec<RunMetrics>> {
    let mut grouped: Vec<((String, u64), Vec<(usize, f64)>)> = Vec::new();
    for r in rows {
        let key = (r.method.clone(), r.seed);
        match grouped.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push((r.step, r.accuracy)),
            None => grouped.push((key, vec![(r.step, r.accuracy)])),
        }
    }
    grouped
        .into_iter()
        .map(|((method, seed), mut steps)| {
            steps.sort_by_key(|s| s.0);
            RunMetrics::new(method, seed, top_k, include_initial, steps.into_iter().map(|s| s.1).collect())
        })
        .collect()
}

#[derive(Serialize)]
struct MetricsDocument<'a> {
    runs: &'a [RunMetrics],
    aggregates: Vec<SeedAggregate>,
}

pub fn write_metrics_json(path: impl AsRef<Path>, runs: &[RunMetrics]) -> Result<()> {
    let doc = MetricsDocument {
        runs,
        aggregates: aggregate_by_method(runs)?,
    };
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, &doc)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

/// Whitespace-delimited accuracy curves: `step mean std` per method, one
/// file each, plus `curves.dat` with every method's mean as a column.
pub fn write_curves(dir: impl AsRef<Path>, aggregates: &[SeedAggregate]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    for agg in aggregates {
        let name = agg.method.replace([':', '/'], "_");
        let mut out = BufWriter::new(File::create(dir.join(format!("curve_{name}.dat")))?);
        writeln!(out, "# {} ({} runs)\n# step mean std", agg.method, agg.runs)?;
        for (k, ms) in agg.per_step.iter().enumerate() {
            writeln!(out, "{k} {:.6} {:.6}", ms.mean, ms.std)?;
        }
        out.flush()?;
    }
    let steps = aggregates.iter().map(|a| a.per_step.len()).max().unwrap_or(0);
    let mut out = BufWriter::new(File::create(dir.join("curves.dat"))?);
    write!(out, "# step")?;
    for a in aggregates {
        write!(out, " {}", a.method)?;
    }
    writeln!(out)?;
    for k in 0..steps {
        write!(out, "{k}")?;
        for a in aggregates {
            match a.per_step.get(k) {
                Some(ms) => write!(out, " {:.6}", ms.mean)?,
                None => write!(out, " NaN")?,
            }
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}
