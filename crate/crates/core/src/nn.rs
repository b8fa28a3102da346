//! Growable-head classifier, the distillation and cross-entropy losses with
//! analytic gradients, plain SGD with weight decay, and checkpoints.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::Sample;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Architecture {
    Linear,
    /// One rectified hidden layer.
    Mlp { hidden: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `out × in`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Dense {
    fn uniform<R: Rng + ?Sized>(out: usize, inp: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (inp.max(1) as f64).sqrt();
        let mut draw = || rng.random_range(-bound..bound);
        Self {
            weight: Array2::from_shape_simple_fn((out, inp), &mut draw),
            bias: Array1::from_shape_simple_fn(out, &mut draw),
        }
    }

    fn apply(&self, x: &Array2<f64>) -> Array2<f64> {
        x.dot(&self.weight.t()) + &self.bias
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Classifier {
    pub architecture: Architecture,
    pub input_dim: usize,
    pub hidden: Option<Dense>,
    pub head: Dense,
    /// Incremental step this model corresponds to.
    pub version: usize,
}

/// Gradients with the same layout as the classifier parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub hidden: Option<Dense>,
    pub head: Dense,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(self.hidden.as_ref(), &self.head)
    }
}

fn flatten_layers(hidden: Option<&Dense>, head: &Dense) -> Vec<f64> {
    let mut out = Vec::new();
    for layer in hidden.into_iter().chain(std::iter::once(head)) {
        out.extend(layer.weight.iter());
        out.extend(layer.bias.iter());
    }
    out
}

/// Stacks sample payloads into a `batch × dim` input matrix.
pub fn batch_matrix<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> Result<Array2<f64>> {
    let rows: Vec<&[f64]> = samples.into_iter().map(|s| s.payload.values()).collect();
    let dim = rows.first().map_or(0, |r| r.len());
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::Shape(format!("payload of dim {} in a batch of dim {dim}", bad.len())));
    }
    let flat: Vec<f64> = rows.iter().flat_map(|r| r.iter().copied()).collect();
    Array2::from_shape_vec((rows.len(), dim), flat).map_err(|e| Error::Shape(e.to_string()))
}

impl Classifier {
    pub fn new<R: Rng + ?Sized>(architecture: Architecture, input_dim: usize, head_count: usize, rng: &mut R) -> Self {
        let (hidden, feat) = match architecture {
            Architecture::Linear => (None, input_dim),
            Architecture::Mlp { hidden } => (Some(Dense::uniform(hidden, input_dim, rng)), hidden),
        };
        Self {
            architecture,
            input_dim,
            hidden,
            head: Dense::uniform(head_count, feat, rng),
            version: 0,
        }
    }

    /// Linear model with every parameter zero.
    pub fn zeros_linear(input_dim: usize, head_count: usize) -> Self {
        Self {
            architecture: Architecture::Linear,
            input_dim,
            hidden: None,
            head: Dense {
                weight: Array2::zeros((head_count, input_dim)),
                bias: Array1::zeros(head_count),
            },
            version: 0,
        }
    }

    pub fn head_count(&self) -> usize {
        self.head.weight.nrows()
    }

    pub fn feature_dim(&self) -> usize {
        self.head.weight.ncols()
    }

    fn check_input(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim {
            return Err(Error::Shape(format!(
                "input dim {} does not match model input {}",
                x.ncols(),
                self.input_dim
            )));
        }
        Ok(())
    }

    fn hidden_pre(&self, x: &Array2<f64>) -> Option<Array2<f64>> {
        self.hidden.as_ref().map(|h| h.apply(x))
    }

    /// Penultimate activations: the rectified hidden layer, or the raw
    /// input for the linear architecture.
    pub fn extract_features(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check_input(x)?;
        Ok(match self.hidden_pre(x) {
            Some(z) => z.mapv(|v| v.max(0.0)),
            None => x.clone(),
        })
    }

    /// One logit row per input, `head_count` wide.
    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let f = self.extract_features(x)?;
        Ok(self.head.apply(&f))
    }

    /// Backpropagates `dlogits` (already scaled for batch averaging).
    pub fn backward(&self, x: &Array2<f64>, dlogits: &Array2<f64>) -> Result<Gradients> {
        self.check_input(x)?;
        if dlogits.dim() != (x.nrows(), self.head_count()) {
            return Err(Error::Shape(format!(
                "logit gradient {:?} for batch {} and {} heads",
                dlogits.dim(),
                x.nrows(),
                self.head_count()
            )));
        }
        let pre = self.hidden_pre(x);
        let feats = match &pre {
            Some(z) => z.mapv(|v| v.max(0.0)),
            None => x.clone(),
        };
        let head = Dense {
            weight: dlogits.t().dot(&feats),
            bias: dlogits.sum_axis(Axis(0)),
        };
        let hidden = match (&self.hidden, pre) {
            (Some(_), Some(z)) => {
                let mut dz = dlogits.dot(&self.head.weight);
                dz.zip_mut_with(&z, |d, &zv| {
                    if zv <= 0.0 {
                        *d = 0.0;
                    }
                });
                Some(Dense {
                    weight: dz.t().dot(x),
                    bias: dz.sum_axis(Axis(0)),
                })
            }
            _ => None,
        };
        Ok(Gradients { hidden, head })
    }

    /// Adds `new_classes` zero-initialised output rows. Existing rows are
    /// untouched, so old-class logits are preserved exactly.
    pub fn grow_head(&mut self, new_classes: usize) -> Result<()> {
        if new_classes == 0 {
            return Err(Error::InvalidInput("grow_head needs at least one new class".into()));
        }
        let (old, feat) = self.head.weight.dim();
        let mut weight = Array2::zeros((old + new_classes, feat));
        weight.slice_mut(ndarray::s![..old, ..]).assign(&self.head.weight);
        let mut bias = Array1::zeros(old + new_classes);
        bias.slice_mut(ndarray::s![..old]).assign(&self.head.bias);
        self.head = Dense { weight, bias };
        Ok(())
    }

    pub fn parameters(&self) -> Vec<f64> {
        flatten_layers(self.hidden.as_ref(), &self.head)
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        let expected = self.parameter_count();
        if values.len() != expected {
            return Err(Error::Shape(format!("{} parameters for a model with {expected}", values.len())));
        }
        let mut it = values.iter().copied();
        for layer in self.hidden.iter_mut().chain(std::iter::once(&mut self.head)) {
            layer.weight.iter_mut().for_each(|w| *w = it.next().unwrap());
            layer.bias.iter_mut().for_each(|b| *b = it.next().unwrap());
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.hidden
            .iter()
            .chain(std::iter::once(&self.head))
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    /// SHA-256 over the little-endian parameter bytes, hex encoded.
    pub fn checksum(&self) -> String {
        let mut h = Sha256::new();
        for v in self.parameters() {
            h.update(v.to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub temperature: f64,
    pub beta: f64,
    pub weight_decay: f64,
    pub learning_rate: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            temperature: 2.0,
            beta: 0.5,
            weight_decay: 1e-4,
            learning_rate: 0.1,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 1.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!("temperature must be > 1, got {}", self.temperature)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Config(format!("beta must lie in [0, 1], got {}", self.beta)));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::Config(format!("weight decay must be >= 0, got {}", self.weight_decay)));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!("learning rate must be > 0, got {}", self.learning_rate)));
        }
        Ok(())
    }
}

fn log_sum_exp(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// `softmax(logits / t)`.
pub fn softened_softmax(logits: &[f64], t: f64) -> Vec<f64> {
    let lse = log_sum_exp(logits.iter().map(|&o| o / t));
    logits.iter().map(|&o| (o / t - lse).exp()).collect()
}

/// Entropy of `softmax(logits / t)`, the lower bound of the distillation
/// loss for these teacher logits.
pub fn softened_entropy(logits: &[f64], t: f64) -> f64 {
    let lse = log_sum_exp(logits.iter().map(|&o| o / t));
    softened_softmax(logits, t)
        .iter()
        .zip(logits)
        .map(|(&p, &o)| if p > 0.0 { -p * (o / t - lse) } else { 0.0 })
        .sum()
}

fn check_distillation(student: &[f64], teacher: &[f64], n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::UndefinedLoss("distillation over zero old classes".into()));
    }
    if teacher.len() != n || student.len() < n {
        return Err(Error::Shape(format!(
            "distillation over {n} classes with teacher width {} and student width {}",
            teacher.len(),
            student.len()
        )));
    }
    Ok(())
}

/// `-Σ_{i<n} p̂_T(i) log p_T(i)`, both softened distributions normalised over
/// the first `n` logits only.
pub fn distillation_loss(student: &[f64], teacher: &[f64], n: usize, t: f64) -> Result<f64> {
    check_distillation(student, teacher, n)?;
    let target = softened_softmax(teacher, t);
    let lse = log_sum_exp(student[..n].iter().map(|&o| o / t));
    Ok(target.iter().zip(&student[..n]).map(|(&p, &o)| -p * (o / t - lse)).sum())
}

/// Gradient of [`distillation_loss`] w.r.t. the full student row; entries
/// beyond `n` are zero.
pub fn distillation_grad(student: &[f64], teacher: &[f64], n: usize, t: f64) -> Result<Vec<f64>> {
    check_distillation(student, teacher, n)?;
    let target = softened_softmax(teacher, t);
    let q = softened_softmax(&student[..n], t);
    let mut g = vec![0.0; student.len()];
    for i in 0..n {
        g[i] = (q[i] - target[i]) / t;
    }
    Ok(g)
}

/// `-log softmax(logits)[label]` over all heads.
pub fn cross_entropy_loss(logits: &[f64], label: usize) -> Result<f64> {
    if label >= logits.len() {
        return Err(Error::Label {
            label,
            heads: logits.len(),
        });
    }
    Ok(log_sum_exp(logits.iter().copied()) - logits[label])
}

pub fn cross_entropy_grad(logits: &[f64], label: usize) -> Result<Vec<f64>> {
    if label >= logits.len() {
        return Err(Error::Label {
            label,
            heads: logits.len(),
        });
    }
    let mut g = softened_softmax(logits, 1.0);
    g[label] -= 1.0;
    Ok(g)
}

/// `β L_D + (1 - β) L_C`. The teacher row width defines the old-class count.
pub fn cross_distillation_loss(student: &[f64], teacher: &[f64], label: usize, cfg: &LossConfig) -> Result<f64> {
    let ld = distillation_loss(student, teacher, teacher.len(), cfg.temperature)?;
    let lc = cross_entropy_loss(student, label)?;
    Ok(cfg.beta * ld + (1.0 - cfg.beta) * lc)
}

pub fn cross_distillation_grad(student: &[f64], teacher: &[f64], label: usize, cfg: &LossConfig) -> Result<Vec<f64>> {
    let gd = distillation_grad(student, teacher, teacher.len(), cfg.temperature)?;
    let gc = cross_entropy_grad(student, label)?;
    Ok(gd
        .iter()
        .zip(&gc)
        .map(|(d, c)| cfg.beta * d + (1.0 - cfg.beta) * c)
        .collect())
}

/// Batch-mean loss and its gradient w.r.t. the student logits. With a
/// teacher the per-row loss is the cross-distillation loss, otherwise plain
/// cross-entropy.
pub fn batch_objective(
    student: &Array2<f64>,
    teacher: Option<&Array2<f64>>,
    labels: &[usize],
    cfg: &LossConfig,
) -> Result<(f64, Array2<f64>)> {
    let b = student.nrows();
    if b == 0 || labels.len() != b {
        return Err(Error::Shape(format!("{} labels for a batch of {b}", labels.len())));
    }
    if let Some(t) = teacher {
        if t.nrows() != b {
            return Err(Error::Shape(format!("teacher batch {} vs student batch {b}", t.nrows())));
        }
    }
    let mut grad = Array2::zeros(student.dim());
    let mut total = 0.0;
    for (r, &label) in labels.iter().enumerate() {
        let s = student.row(r).to_vec();
        let (loss, g) = match teacher {
            Some(t) => {
                let t = t.row(r).to_vec();
                (
                    cross_distillation_loss(&s, &t, label, cfg)?,
                    cross_distillation_grad(&s, &t, label, cfg)?,
                )
            }
            None => (cross_entropy_loss(&s, label)?, cross_entropy_grad(&s, label)?),
        };
        total += loss;
        grad.row_mut(r).assign(&Array1::from(g));
    }
    grad /= b as f64;
    Ok((total / b as f64, grad))
}

/// `w ← w - lr (g + λ w)` for weights, `b ← b - lr g` for biases. Nothing is
/// modified when any gradient entry is non-finite.
pub fn sgd_step(model: &mut Classifier, grads: &Gradients, cfg: &LossConfig) -> Result<()> {
    if grads.flatten().iter().any(|g| !g.is_finite()) {
        return Err(Error::Numeric("non-finite gradient".into()));
    }
    let layers = model
        .hidden
        .iter_mut()
        .zip(grads.hidden.iter())
        .chain(std::iter::once((&mut model.head, &grads.head)));
    for (layer, g) in layers {
        if layer.weight.dim() != g.weight.dim() || layer.bias.dim() != g.bias.dim() {
            return Err(Error::Shape("gradient shape does not match parameters".into()));
        }
        let (lr, wd) = (cfg.learning_rate, cfg.weight_decay);
        layer.weight.zip_mut_with(&g.weight, |w, &gw| *w -= lr * (gw + wd * *w));
        layer.bias.zip_mut_with(&g.bias, |b, &gb| *b -= lr * gb);
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct CheckpointMeta {
    architecture: Architecture,
    input_dim: usize,
    head_count: usize,
    version: usize,
    tensors: Vec<String>,
}

fn checkpoint_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("json"))
}

/// Writes `<stem>.bin` and `<stem>.json`.
///
/// The binary file is a `u64` tensor count followed, per tensor, by a `u64`
/// rank, `u64` dimensions and the values as little-endian `f64`. Tensors are
/// stored hidden weight, hidden bias, head weight, head bias.
pub fn save_checkpoint(model: &Classifier, stem: impl AsRef<Path>) -> Result<()> {
    let (bin, json) = checkpoint_paths(stem.as_ref());
    let mut out = BufWriter::new(File::create(bin)?);
    let layers: Vec<&Dense> = model.hidden.iter().chain(std::iter::once(&model.head)).collect();
    out.write_all(&(2 * layers.len() as u64).to_le_bytes())?;
    let mut names = Vec::new();
    for (li, layer) in layers.iter().enumerate() {
        let prefix = if li + 1 == layers.len() { "head" } else { "hidden" };
        let (r, c) = layer.weight.dim();
        for v in [2u64, r as u64, c as u64] {
            out.write_all(&v.to_le_bytes())?;
        }
        for w in layer.weight.iter() {
            out.write_all(&w.to_le_bytes())?;
        }
        for v in [1u64, layer.bias.len() as u64] {
            out.write_all(&v.to_le_bytes())?;
        }
        for b in layer.bias.iter() {
            out.write_all(&b.to_le_bytes())?;
        }
        names.push(format!("{prefix}.weight"));
        names.push(format!("{prefix}.bias"));
    }
    out.flush()?;
    let meta = CheckpointMeta {
        architecture: model.architecture,
        input_dim: model.input_dim,
        head_count: model.head_count(),
        version: model.version,
        tensors: names,
    };
    let mut j = BufWriter::new(File::create(json)?);
    serde_json::to_writer_pretty(&mut j, &meta)?;
    j.write_all(b"\n")?;
    j.flush()?;
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)
        .map_err(|e| Error::Checkpoint(format!("truncated checkpoint: {e}")))?;
    Ok(u64::from_le_bytes(buf))
}

fn read_tensor(r: &mut impl Read) -> Result<(Vec<usize>, Vec<f64>)> {
    let rank = read_u64(r)? as usize;
    if rank == 0 || rank > 2 {
        return Err(Error::Checkpoint(format!("unsupported tensor rank {rank}")));
    }
    let dims = (0..rank).map(|_| read_u64(r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
    let len = dims.iter().product();
    let values = (0..len)
        .map(|_| read_u64(r).map(f64::from_bits))
        .collect::<Result<Vec<_>>>()?;
    Ok((dims, values))
}

pub fn load_checkpoint(stem: impl AsRef<Path>) -> Result<Classifier> {
    let (bin, json) = checkpoint_paths(stem.as_ref());
    let meta: CheckpointMeta = serde_json::from_reader(BufReader::new(File::open(json)?))?;
    let mut r = BufReader::new(File::open(bin)?);
    let count = read_u64(&mut r)? as usize;
    let expected = match meta.architecture {
        Architecture::Linear => 2,
        Architecture::Mlp { .. } => 4,
    };
    if count != expected || meta.tensors.len() != expected {
        return Err(Error::Checkpoint(format!("expected {expected} tensors, found {count}")));
    }
    let mut layers = Vec::new();
    for _ in 0..expected / 2 {
        let (wd, w) = read_tensor(&mut r)?;
        let (bd, b) = read_tensor(&mut r)?;
        if wd.len() != 2 || bd.len() != 1 || bd[0] != wd[0] {
            return Err(Error::Checkpoint("layer tensor shapes disagree".into()));
        }
        layers.push(Dense {
            weight: Array2::from_shape_vec((wd[0], wd[1]), w).map_err(|e| Error::Checkpoint(e.to_string()))?,
            bias: Array1::from(b),
        });
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Checkpoint("trailing bytes after last tensor".into()));
    }
    let head = layers.pop().unwrap();
    let hidden = layers.pop();
    let model = Classifier {
        architecture: meta.architecture,
        input_dim: meta.input_dim,
        hidden,
        head,
        version: meta.version,
    };
    let input_ok = match &model.hidden {
        Some(h) => h.weight.ncols() == meta.input_dim && h.weight.nrows() == model.feature_dim(),
        None => model.feature_dim() == meta.input_dim,
    };
    if !input_ok || model.head_count() != meta.head_count {
        return Err(Error::Checkpoint("sidecar does not match tensor shapes".into()));
    }
    Ok(model)
}
