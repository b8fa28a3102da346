//! The online class-incremental protocol for the proposed method and the
//! baselines.
//!
//! Every method starts with [`Learner::run_initial_task`] (plain
//! cross-entropy over `D^0`, then exemplar selection) and then consumes one
//! stream per incremental step with [`Learner::run_incremental_step`]. Stream
//! samples are used for exactly one gradient update; replayed exemplars are
//! exempt. The [`UsageAudit`] records both facts so they can be checked.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augment::{make_contrastive_batch, AugmentPolicy};
use crate::clustering::ClusterParams;
use crate::data::{ClassId, Sample};
use crate::error::{Error, Result};
use crate::memory::{
    draw_replay, greedy_balanced_update, reservoir_update, select_cluster_exemplars, select_herding_exemplars,
    select_random_exemplars, ExemplarSet, SelectionPolicy,
};
use crate::nn::{batch_matrix, batch_objective, sgd_step, Architecture, Classifier, LossConfig};

/// How replay batches are composed and what the student sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// A uniformly random number of exemplars in `0..=b/2` joins each group
    /// of `b/2` new samples; teacher and student see the same batch.
    RandomReplay,
    /// Exactly `b/2` exemplars per `b/2` new samples; teacher and student see
    /// the same batch.
    BalancedIdentical,
    /// Balanced batch; the student sees the augmented contrastive batch and
    /// the teacher the original.
    BalancedContrastive,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::RandomReplay => "random_replay",
            Regime::BalancedIdentical => "balanced_identical",
            Regime::BalancedContrastive => "balanced_contrastive",
        })
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "random_replay" | "baseline" => Regime::RandomReplay,
            "balanced_identical" => Regime::BalancedIdentical,
            "balanced_contrastive" | "ours" => Regime::BalancedContrastive,
            other => return Err(Error::Config(format!("unknown regime {other:?}"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Cluster exemplars, balanced batches, contrastive-batch distillation.
    Ours,
    Finetune,
    UpperBound,
    /// Reservoir memory with random retrieval.
    Er,
    /// Greedy class-balanced memory, model retrained from memory.
    Gdumb,
    /// Herding exemplars, identical-batch distillation, nearest-class-mean
    /// inference.
    IcarlNcm,
    Ablation { selection: SelectionPolicy, regime: Regime },
}

impl Method {
    /// Exemplar policy and batch regime for the replay-with-distillation
    /// family.
    pub fn replay_plan(self) -> Option<(SelectionPolicy, Regime)> {
        match self {
            Method::Ours => Some((SelectionPolicy::Cluster, Regime::BalancedContrastive)),
            Method::IcarlNcm => Some((SelectionPolicy::Herding, Regime::BalancedIdentical)),
            Method::Ablation { selection, regime } => Some((selection, regime)),
            _ => None,
        }
    }

    pub fn memory_policy(self) -> Option<SelectionPolicy> {
        match self {
            Method::Er => Some(SelectionPolicy::Reservoir),
            Method::Gdumb => Some(SelectionPolicy::GreedyBalanced),
            m => m.replay_plan().map(|(s, _)| s),
        }
    }

    pub fn uses_ncm(self) -> bool {
        matches!(self, Method::IcarlNcm)
    }
}

const NAMED_ABLATIONS: [(&str, SelectionPolicy, Regime); 3] = [
    ("baseline", SelectionPolicy::Herding, Regime::RandomReplay),
    ("baseline_our_exp", SelectionPolicy::Cluster, Regime::RandomReplay),
    ("baseline_our_regime", SelectionPolicy::Herding, Regime::BalancedContrastive),
];

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Method::Ours => "ours".to_string(),
            Method::Finetune => "finetune".to_string(),
            Method::UpperBound => "upper_bound".to_string(),
            Method::Er => "er".to_string(),
            Method::Gdumb => "gdumb".to_string(),
            Method::IcarlNcm => "icarl_ncm".to_string(),
            Method::Ablation { selection, regime } => {
                match NAMED_ABLATIONS.iter().find(|(_, s, r)| s == selection && r == regime) {
                    Some((name, _, _)) => name.to_string(),
                    None => format!("ablation:{selection}:{regime}"),
                }
            }
        };
        f.pad(&name)
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        Ok(match s {
            "ours" => Method::Ours,
            "finetune" => Method::Finetune,
            "upper_bound" => Method::UpperBound,
            "er" => Method::Er,
            "gdumb" => Method::Gdumb,
            "icarl_ncm" | "icarl" => Method::IcarlNcm,
            _ => {
                if let Some((_, selection, regime)) = NAMED_ABLATIONS.iter().find(|(n, _, _)| *n == s) {
                    return Ok(Method::Ablation {
                        selection: *selection,
                        regime: *regime,
                    });
                }
                let parts: Vec<&str> = s.split(':').collect();
                match parts.as_slice() {
                    ["ablation", sel, reg] => Method::Ablation {
                        selection: sel.parse()?,
                        regime: reg.parse()?,
                    },
                    _ => return Err(Error::Config(format!("unknown method {s:?}"))),
                }
            }
        })
    }
}

impl Serialize for Method {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    pub method: Method,
    pub batch_size: usize,
    /// Exemplars per class for per-class policies.
    pub budget: usize,
    /// Total memory for reservoir and greedy-balanced policies.
    pub capacity: usize,
    pub loss: LossConfig,
    pub augment: AugmentPolicy,
    pub architecture: Architecture,
    pub cluster: ClusterParams,
    /// Memory retrievals per group of `b/2` incoming samples for ER.
    pub er_retrievals: Option<usize>,
    /// Passes over memory when GDumb retrains its model.
    pub gdumb_passes: usize,
    /// Re-initialise the upper-bound model before each step.
    pub upper_bound_reinit: bool,
    pub seed: u64,
}

impl LearnerConfig {
    pub fn new(method: Method, seed: u64) -> Self {
        Self {
            method,
            batch_size: 32,
            budget: 20,
            capacity: 200,
            loss: LossConfig::default(),
            augment: AugmentPolicy::default(),
            architecture: Architecture::Mlp { hidden: 64 },
            cluster: ClusterParams {
                normalize: true,
                ..ClusterParams::default()
            },
            er_retrievals: None,
            gdumb_passes: 1,
            upper_bound_reinit: false,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        self.augment.validate()?;
        if self.batch_size < 2 {
            return Err(Error::Config("batch size must be at least 2".into()));
        }
        if self.method.replay_plan().is_some() && !self.batch_size.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "balanced replay needs an even batch size, got {}",
                self.batch_size
            )));
        }
        if self.budget == 0 && self.method.replay_plan().is_some() {
            return Err(Error::Config("exemplar budget must be at least 1".into()));
        }
        if self.gdumb_passes == 0 {
            return Err(Error::Config("gdumb passes must be at least 1".into()));
        }
        Ok(())
    }

    fn half_batch(&self) -> usize {
        (self.batch_size / 2).max(1)
    }
}

/// Stream-usage bookkeeping for the single-pass guarantee.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UsageAudit {
    /// `(task, arrival_index)` → number of gradient updates the stream
    /// sample took part in.
    pub stream_updates: BTreeMap<(usize, usize), usize>,
    /// Replayed exemplar positions across all updates.
    pub replay_positions: usize,
    pub updates: usize,
    /// Teacher checksum taken before and after each incremental step.
    pub teacher_checks: Vec<(usize, String, String)>,
}

impl UsageAudit {
    /// Whether every sample of each given stream took part in exactly one
    /// update.
    pub fn single_pass(&self, task: usize, stream: &[Sample]) -> bool {
        let recorded = self.stream_updates.keys().filter(|(t, _)| *t == task).count();
        recorded == stream.len()
            && stream
                .iter()
                .all(|s| self.stream_updates.get(&(task, s.arrival_index)) == Some(&1))
    }

    pub fn teachers_unchanged(&self) -> bool {
        self.teacher_checks.iter().all(|(_, a, b)| a == b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub batch: usize,
    pub loss: f64,
}

/// Draws `replay_count` exemplars and interleaves them pairwise with
/// `new_buffer` (`new, replay, new, replay, ...`); surplus items of either
/// kind follow in order. The mask marks replay positions. With an empty
/// memory the batch is `new_buffer` alone.
pub fn compose_batch<R: Rng + ?Sized>(
    new_buffer: &[Sample],
    memory: &ExemplarSet,
    replay_count: usize,
    rng: &mut R,
) -> Result<(Vec<Sample>, Vec<bool>)> {
    let replays = if memory.is_empty() || replay_count == 0 {
        Vec::new()
    } else {
        draw_replay(memory, replay_count, rng)?
    };
    let mut batch = Vec::with_capacity(new_buffer.len() + replays.len());
    let mut mask = Vec::with_capacity(batch.capacity());
    let mut new_it = new_buffer.iter();
    let mut rep_it = replays.into_iter();
    loop {
        let n = new_it.next();
        if let Some(s) = n {
            batch.push(s.clone());
            mask.push(false);
        }
        let r = rep_it.next();
        let more = r.is_some();
        if let Some(s) = r {
            batch.push(s);
            mask.push(true);
        }
        if n.is_none() && !more {
            break;
        }
    }
    Ok((batch, mask))
}

/// Balanced batch: one replayed exemplar per new sample.
pub fn compose_balanced_batch<R: Rng + ?Sized>(
    new_buffer: &[Sample],
    memory: &ExemplarSet,
    rng: &mut R,
) -> Result<(Vec<Sample>, Vec<bool>)> {
    compose_batch(new_buffer, memory, new_buffer.len(), rng)
}

/// Exemplar class means in feature space, in class-id order.
pub fn class_means(model: &Classifier, memory: &ExemplarSet) -> Result<Vec<(ClassId, Vec<f64>)>> {
    memory
        .per_class
        .iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|(&c, exemplars)| {
            let feats = model.extract_features(&batch_matrix(exemplars)?)?;
            let mean = feats.mean_axis(ndarray::Axis(0)).expect("non-empty exemplar set");
            Ok((c, mean.to_vec()))
        })
        .collect()
}

/// Negative squared distance from each input's features to each class mean.
pub fn ncm_scores(model: &Classifier, means: &[(ClassId, Vec<f64>)], x: &Array2<f64>) -> Result<Array2<f64>> {
    let feats = model.extract_features(x)?;
    Ok(Array2::from_shape_fn((x.nrows(), means.len()), |(r, c)| {
        -feats
            .row(r)
            .iter()
            .zip(&means[c].1)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    }))
}

/// Nearest-class-mean prediction from exemplar features.
pub fn predict_ncm(model: &Classifier, memory: &ExemplarSet, batch: &[Sample]) -> Result<Vec<ClassId>> {
    let means = class_means(model, memory)?;
    if means.is_empty() {
        return Err(Error::EmptyMemory);
    }
    let scores = ncm_scores(model, &means, &batch_matrix(batch)?)?;
    Ok(scores
        .rows()
        .into_iter()
        .map(|row| {
            let best = (0..row.len())
                .max_by(|&a, &b| row[a].total_cmp(&row[b]).then(b.cmp(&a)))
                .unwrap();
            means[best].0
        })
        .collect())
}

pub struct Learner {
    cfg: LearnerConfig,
    input_dim: usize,
    model: Classifier,
    memory: ExemplarSet,
    classes: Vec<ClassId>,
    head_of: HashMap<ClassId, usize>,
    task_of: HashMap<ClassId, usize>,
    seen_train: Vec<Sample>,
    rng: ChaCha8Rng,
    aug_rng: ChaCha8Rng,
    step: usize,
    started: bool,
    pub audit: UsageAudit,
    pub trace: Vec<LossRecord>,
}

impl Learner {
    pub fn new(cfg: LearnerConfig, input_dim: usize) -> Result<Self> {
        cfg.validate()?;
        if input_dim == 0 {
            return Err(Error::InvalidInput("input dimension must be positive".into()));
        }
        let policy = cfg.method.memory_policy().unwrap_or(SelectionPolicy::Random);
        let budget = if policy.is_capacity() { cfg.capacity } else { cfg.budget };
        Ok(Self {
            input_dim,
            model: Classifier::zeros_linear(input_dim, 0),
            memory: ExemplarSet::new(policy, budget),
            classes: Vec::new(),
            head_of: HashMap::new(),
            task_of: HashMap::new(),
            seen_train: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            aug_rng: ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x4155_474d_454e_54),
            step: 0,
            started: false,
            audit: UsageAudit::default(),
            trace: Vec::new(),
            cfg,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.cfg
    }

    pub fn model(&self) -> &Classifier {
        &self.model
    }

    pub fn memory(&self) -> &ExemplarSet {
        &self.memory
    }

    /// Classes in head order.
    pub fn classes(&self) -> &[ClassId] {
        &self.classes
    }

    pub fn step(&self) -> usize {
        self.step
    }

    fn register_classes(&mut self, new_classes: &[ClassId]) -> Result<()> {
        if new_classes.is_empty() {
            return Err(Error::InvalidTask("task introduces no classes".into()));
        }
        for &c in new_classes {
            if self.head_of.contains_key(&c) {
                return Err(Error::InvalidTask(format!("class {c} was already learned")));
            }
            self.head_of.insert(c, self.classes.len());
            self.task_of.insert(c, self.step);
            self.classes.push(c);
        }
        Ok(())
    }

    fn check_stream(&self, stream: &[Sample], new_classes: &[ClassId]) -> Result<()> {
        if stream.is_empty() {
            return Err(Error::InvalidTask(format!("empty stream for step {}", self.step)));
        }
        if let Some(s) = stream.iter().find(|s| !new_classes.contains(&s.label)) {
            return Err(Error::InvalidTask(format!(
                "stream sample labelled {} is not one of the task's classes",
                s.label
            )));
        }
        if let Some(s) = stream.iter().find(|s| s.payload.dim() != self.input_dim) {
            return Err(Error::Shape(format!(
                "payload dim {} for model input {}",
                s.payload.dim(),
                self.input_dim
            )));
        }
        Ok(())
    }

    fn heads(&self, batch: &[Sample]) -> Vec<usize> {
        batch.iter().map(|s| self.head_of[&s.label]).collect()
    }

    /// One SGD update. `stream_mask[i]` is true for positions holding stream
    /// samples of the current task.
    fn update(
        &mut self,
        student_batch: &[Sample],
        teacher: Option<(&Classifier, &[Sample])>,
        stream_mask: &[bool],
    ) -> Result<()> {
        let x = batch_matrix(student_batch)?;
        let labels = self.heads(student_batch);
        let logits = self.model.forward(&x)?;
        let teacher_logits = match teacher {
            Some((t, batch)) => Some(t.forward(&batch_matrix(batch)?)?),
            None => None,
        };
        let (loss, dlogits) = batch_objective(&logits, teacher_logits.as_ref(), &labels, &self.cfg.loss)?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "non-finite loss at step {} batch {}",
                self.step,
                self.audit.updates
            )));
        }
        let grads = self.model.backward(&x, &dlogits)?;
        sgd_step(&mut self.model, &grads, &self.cfg.loss).map_err(|e| {
            Error::Numeric(format!("step {} batch {}: {e}", self.step, self.audit.updates))
        })?;
        for (s, &is_stream) in student_batch.iter().zip(stream_mask) {
            if is_stream {
                *self.audit.stream_updates.entry((self.step, s.arrival_index)).or_default() += 1;
            } else {
                self.audit.replay_positions += 1;
            }
        }
        self.trace.push(LossRecord {
            step: self.step,
            batch: self.audit.updates,
            loss,
        });
        self.audit.updates += 1;
        Ok(())
    }

    fn train_plain(&mut self, data: &[Sample], stream: bool) -> Result<()> {
        let b = self.cfg.batch_size;
        for chunk in data.chunks(b) {
            self.update(chunk, None, &vec![stream; chunk.len()])?;
        }
        Ok(())
    }

    fn select_for_classes(&mut self, stream: &[Sample], classes: &[ClassId]) -> Result<()> {
        let policy = self.memory.policy;
        if policy.is_capacity() {
            return Ok(());
        }
        for &c in classes {
            let class_data: Vec<Sample> = stream.iter().filter(|s| s.label == c).cloned().collect();
            if class_data.is_empty() {
                continue;
            }
            let feats = self.model.extract_features(&batch_matrix(&class_data)?)?;
            let rows: Vec<Vec<f64>> = feats.rows().into_iter().map(|r| r.to_vec()).collect();
            let q = self.memory.budget;
            let chosen = match policy {
                SelectionPolicy::Cluster => select_cluster_exemplars(&class_data, &rows, q, &self.cfg.cluster)?,
                SelectionPolicy::Herding => select_herding_exemplars(&class_data, &rows, q)?,
                SelectionPolicy::Random => select_random_exemplars(&class_data, q, &mut self.rng)?,
                SelectionPolicy::Reservoir | SelectionPolicy::GreedyBalanced => unreachable!(),
            };
            self.memory.insert_class(c, chosen)?;
        }
        Ok(())
    }

    /// Plain cross-entropy pass over `D^0`, then exemplar selection.
    pub fn run_initial_task(&mut self, stream: &[Sample], classes: &[ClassId]) -> Result<()> {
        if self.started {
            return Err(Error::InvalidTask("initial task already learned".into()));
        }
        self.check_stream(stream, classes)?;
        self.register_classes(classes)?;
        self.started = true;
        self.step = 0;
        if self.cfg.method == Method::Gdumb {
            return self.run_incremental_step_gdumb(stream);
        }
        self.model = Classifier::new(self.cfg.architecture, self.input_dim, classes.len(), &mut self.rng);
        let b = self.cfg.batch_size;
        for chunk in stream.chunks(b) {
            self.update(chunk, None, &vec![true; chunk.len()])?;
            if self.cfg.method == Method::Er {
                for s in chunk {
                    reservoir_update(&mut self.memory, s.clone(), &mut self.rng);
                }
            }
        }
        if self.cfg.method == Method::UpperBound {
            self.seen_train.extend_from_slice(stream);
        }
        if self.cfg.method.replay_plan().is_some() {
            self.select_for_classes(stream, classes)?;
        }
        Ok(())
    }

    /// Learns one incremental step's classes from `stream`.
    pub fn run_incremental_step(&mut self, stream: &[Sample], new_classes: &[ClassId]) -> Result<()> {
        if !self.started {
            return Err(Error::InvalidTask("initial task must be learned first".into()));
        }
        self.check_stream(stream, new_classes)?;
        self.step += 1;
        self.register_classes(new_classes)?;
        let m = new_classes.len();
        match self.cfg.method {
            Method::Finetune => {
                self.model.grow_head(m)?;
                self.run_incremental_step_finetune(stream)
            }
            Method::UpperBound => {
                self.model.grow_head(m)?;
                self.seen_train.extend_from_slice(stream);
                self.run_incremental_step_upper_bound()
            }
            Method::Er => {
                self.model.grow_head(m)?;
                self.run_incremental_step_er(stream)
            }
            Method::Gdumb => self.run_incremental_step_gdumb(stream),
            _ => self.run_incremental_step_ours(stream, new_classes),
        }?;
        self.model.version = self.step;
        Ok(())
    }

    /// Replay-with-distillation step. Under the balanced contrastive regime
    /// this is the proposed method: teacher on `B_o`, student on `B_c`.
    pub fn run_incremental_step_ours(&mut self, stream: &[Sample], new_classes: &[ClassId]) -> Result<()> {
        let (_, regime) = self
            .cfg
            .method
            .replay_plan()
            .ok_or_else(|| Error::Config(format!("{} has no replay plan", self.cfg.method)))?;
        let teacher = self.model.clone();
        let before = teacher.checksum();
        self.model.grow_head(new_classes.len())?;
        let half = self.cfg.half_batch();
        for chunk in stream.chunks(half) {
            let replay_count = match regime {
                Regime::RandomReplay => self.rng.random_range(0..=half),
                _ => chunk.len(),
            };
            let (original, mask) = compose_batch(chunk, &self.memory, replay_count, &mut self.rng)?;
            let stream_mask: Vec<bool> = mask.iter().map(|m| !m).collect();
            if self.memory.is_empty() {
                self.update(&original, None, &stream_mask)?;
                continue;
            }
            let student = if regime == Regime::BalancedContrastive {
                make_contrastive_batch(&original, &mask, &self.cfg.augment, &mut self.aug_rng)?
            } else {
                original.clone()
            };
            self.update(&student, Some((&teacher, &original)), &stream_mask)?;
        }
        self.audit
            .teacher_checks
            .push((self.step, before, teacher.checksum()));
        self.select_for_classes(stream, new_classes)
    }

    /// Cross-entropy on new data only.
    pub fn run_incremental_step_finetune(&mut self, stream: &[Sample]) -> Result<()> {
        self.train_plain(stream, true)
    }

    /// One shuffled pass over every training sample seen so far.
    pub fn run_incremental_step_upper_bound(&mut self) -> Result<()> {
        if self.cfg.upper_bound_reinit {
            self.model = Classifier::new(self.cfg.architecture, self.input_dim, self.classes.len(), &mut self.rng);
        }
        let mut union = self.seen_train.clone();
        union.shuffle(&mut self.rng);
        let step = self.step;
        let b = self.cfg.batch_size;
        for chunk in union.chunks(b) {
            // earlier tasks' samples count as replays
            let mask: Vec<bool> = chunk.iter().map(|s| self.task_of.get(&s.label) == Some(&step)).collect();
            self.update(chunk, None, &mask)?;
        }
        Ok(())
    }

    /// Each group of `b/2` incoming samples trains with `b/2` random
    /// retrievals (configurable), then enters the reservoir.
    pub fn run_incremental_step_er(&mut self, stream: &[Sample]) -> Result<()> {
        let half = self.cfg.half_batch();
        let retrievals = self.cfg.er_retrievals.unwrap_or(half);
        for chunk in stream.chunks(half) {
            let (batch, mask) = compose_batch(chunk, &self.memory, retrievals, &mut self.rng)?;
            let stream_mask: Vec<bool> = mask.iter().map(|m| !m).collect();
            self.update(&batch, None, &stream_mask)?;
            for s in chunk {
                reservoir_update(&mut self.memory, s.clone(), &mut self.rng);
            }
        }
        Ok(())
    }

    /// Stream samples only update the greedy-balanced memory; the model is
    /// then retrained from scratch on the memory contents.
    pub fn run_incremental_step_gdumb(&mut self, stream: &[Sample]) -> Result<()> {
        for s in stream {
            greedy_balanced_update(&mut self.memory, s.clone(), &mut self.rng);
        }
        let mut fresh_rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ (0x4744_554d_4200 + self.step as u64));
        self.model = Classifier::new(self.cfg.architecture, self.input_dim, self.classes.len(), &mut fresh_rng);
        for _ in 0..self.cfg.gdumb_passes {
            let mut data: Vec<Sample> = self.memory.iter().cloned().collect();
            data.shuffle(&mut fresh_rng);
            self.train_plain(&data, false)?;
        }
        Ok(())
    }

    /// Class scores with one column per learned class, in head order. NCM
    /// methods score by negative distance to exemplar class means.
    pub fn class_scores(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if self.cfg.method.uses_ncm() {
            let means = class_means(&self.model, &self.memory)?;
            let mut out = Array2::from_elem((x.nrows(), self.classes.len()), f64::NEG_INFINITY);
            let scores = ncm_scores(&self.model, &means, x)?;
            for (col, (c, _)) in means.iter().enumerate() {
                out.column_mut(self.head_of[c]).assign(&scores.column(col));
            }
            Ok(out)
        } else {
            self.model.forward(x)
        }
    }
}
