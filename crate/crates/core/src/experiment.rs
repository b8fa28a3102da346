//! Experiment configs, the method × seed grid runner and the budget sweep.
//!
//! A config is a TOML file with the sections `[experiment]`, `[data]`,
//! `[model]`, `[train]`, `[augment]` and `[cluster]`; see
//! `configs/blobs.toml` for every key. Outputs land in
//! `<results root>/<name>-<hash>/` where the hash covers the canonical
//! config, so different configs never share a directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::augment::AugmentPolicy;
use crate::clustering::ClusterParams;
use crate::data::{
    generate_blob_stream, imbalanced_counts, ingest_feature_csv, ingest_idx_images, BlobSpec, StreamPartition,
    TaskSchedule,
};
use crate::error::{Error, Result};
use crate::eval::{
    aggregate_by_method, evaluate_step, write_curves, write_metrics_csv, write_metrics_json, Averaging, MeanStd,
    RunMetrics,
};
use crate::learner::{Learner, LearnerConfig, Method, UsageAudit};
use crate::nn::{save_checkpoint, Architecture, LossConfig};

/// Environment variable overriding the default results root (`results`).
pub const RESULTS_ENV: &str = "OCL_RESULTS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    #[serde(default = "default_name")]
    pub name: String,
    pub methods: Vec<Method>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Each k gets its own metrics files.
    #[serde(default = "default_top_k")]
    pub top_k: Vec<usize>,
    #[serde(default)]
    pub averaging: Averaging,
    /// Count the initial task in Avg.
    #[serde(default = "yes")]
    pub include_initial: bool,
    #[serde(default = "yes")]
    pub checkpoints: bool,
    #[serde(default)]
    pub loss_trace: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Blobs,
    Csv,
    Idx,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub source: DataSource,
    pub initial_classes: usize,
    pub step_size: usize,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Seeds blob generation; run seeds are added so each seed sees its own
    /// draw of the same distribution family.
    #[serde(default)]
    pub seed: u64,
    // blobs
    #[serde(default)]
    pub classes: Option<usize>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub min_count: Option<usize>,
    #[serde(default)]
    pub max_count: Option<usize>,
    #[serde(default)]
    pub spread: Option<f64>,
    #[serde(default)]
    pub modes: Option<usize>,
    #[serde(default)]
    pub box_half_width: Option<f64>,
    #[serde(default)]
    pub min_separation: Option<f64>,
    // csv
    #[serde(default)]
    pub path: Option<PathBuf>,
    // idx
    #[serde(default)]
    pub images: Option<PathBuf>,
    #[serde(default)]
    pub labels: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    /// `linear` or `mlp`.
    #[serde(default = "default_arch")]
    pub architecture: String,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Total memory for ER and GDumb; defaults to `budget × classes`.
    #[serde(default)]
    pub capacity: Option<usize>,
    #[serde(default = "default_lr")]
    pub learning_rate: f64,
    #[serde(default = "default_wd")]
    pub weight_decay: f64,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub er_retrievals: Option<usize>,
    #[serde(default = "default_passes")]
    pub gdumb_passes: usize,
    #[serde(default)]
    pub upper_bound_reinit: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub augment: AugmentPolicy,
    #[serde(default = "default_cluster")]
    pub cluster: ClusterParams,
}

fn default_name() -> String {
    "experiment".into()
}
fn default_seeds() -> Vec<u64> {
    (0..5).collect()
}
fn default_top_k() -> Vec<usize> {
    vec![1]
}
fn yes() -> bool {
    true
}
fn default_test_fraction() -> f64 {
    0.2
}
fn default_arch() -> String {
    "mlp".into()
}
fn default_hidden() -> usize {
    64
}
fn default_batch() -> usize {
    32
}
fn default_budget() -> usize {
    20
}
fn default_lr() -> f64 {
    LossConfig::default().learning_rate
}
fn default_wd() -> f64 {
    LossConfig::default().weight_decay
}
fn default_temperature() -> f64 {
    LossConfig::default().temperature
}
fn default_beta() -> f64 {
    LossConfig::default().beta
}
fn default_passes() -> usize {
    1
}
fn default_cluster() -> ClusterParams {
    ClusterParams {
        normalize: true,
        ..ClusterParams::default()
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            architecture: default_arch(),
            hidden: default_hidden(),
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        Self {
            batch_size: default_batch(),
            budget: default_budget(),
            capacity: None,
            learning_rate: default_lr(),
            weight_decay: default_wd(),
            temperature: default_temperature(),
            beta: default_beta(),
            er_retrievals: None,
            gdumb_passes: default_passes(),
            upper_bound_reinit: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config. Relative data paths are resolved
    /// against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.data.path, &mut cfg.data.images, &mut cfg.data.labels].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml_string()?.as_bytes());
        Ok(digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        }))
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.experiment;
        if e.methods.is_empty() {
            return Err(Error::Config("no methods listed".into()));
        }
        if e.seeds.is_empty() {
            return Err(Error::Config("no seeds listed".into()));
        }
        if e.top_k.is_empty() || e.top_k.contains(&0) {
            return Err(Error::Config("top_k entries must be at least 1".into()));
        }
        if e.name.is_empty() || e.name.contains(['/', '\\']) {
            return Err(Error::Config(format!("bad experiment name {:?}", e.name)));
        }
        let d = &self.data;
        if d.initial_classes == 0 || d.step_size == 0 {
            return Err(Error::Config("initial_classes and step_size must be at least 1".into()));
        }
        match d.source {
            DataSource::Blobs => {
                for (key, present) in [
                    ("classes", d.classes.is_some()),
                    ("dim", d.dim.is_some()),
                    ("min_count", d.min_count.is_some()),
                    ("max_count", d.max_count.is_some()),
                    ("spread", d.spread.is_some()),
                ] {
                    if !present {
                        return Err(Error::Config(format!("blob data needs `{key}`")));
                    }
                }
                if d.min_count > d.max_count {
                    return Err(Error::Config("min_count exceeds max_count".into()));
                }
            }
            DataSource::Csv if d.path.is_none() => return Err(Error::Config("csv data needs `path`".into())),
            DataSource::Idx if d.images.is_none() || d.labels.is_none() => {
                return Err(Error::Config("idx data needs `images` and `labels`".into()))
            }
            _ => {}
        }
        self.architecture()?;
        for &m in &e.methods {
            self.learner_config(m, 0, 1).validate()?;
        }
        Ok(())
    }

    pub fn architecture(&self) -> Result<Architecture> {
        match self.model.architecture.as_str() {
            "linear" => Ok(Architecture::Linear),
            "mlp" if self.model.hidden > 0 => Ok(Architecture::Mlp {
                hidden: self.model.hidden,
            }),
            other => Err(Error::Config(format!(
                "unknown architecture {other:?} (hidden = {})",
                self.model.hidden
            ))),
        }
    }

    /// Learner settings for one cell. `n_classes` sizes the default
    /// capacity of ER and GDumb.
    pub fn learner_config(&self, method: Method, seed: u64, n_classes: usize) -> LearnerConfig {
        let t = &self.train;
        let mut cfg = LearnerConfig::new(method, seed);
        cfg.batch_size = t.batch_size;
        cfg.budget = t.budget;
        cfg.capacity = t.capacity.unwrap_or(t.budget * n_classes.max(1));
        cfg.loss = LossConfig {
            temperature: t.temperature,
            beta: t.beta,
            weight_decay: t.weight_decay,
            learning_rate: t.learning_rate,
        };
        cfg.augment = self.augment;
        cfg.architecture = self.architecture().unwrap_or(Architecture::Linear);
        cfg.cluster = self.cluster;
        cfg.er_retrievals = t.er_retrievals;
        cfg.gdumb_passes = t.gdumb_passes;
        cfg.upper_bound_reinit = t.upper_bound_reinit;
        cfg
    }

    /// Train/test partition for one run seed.
    pub fn load_partition(&self, seed: u64) -> Result<StreamPartition> {
        let d = &self.data;
        match d.source {
            DataSource::Blobs => {
                let data_seed = d.seed.wrapping_add(seed);
                let n = d.classes.unwrap_or(0);
                let counts = imbalanced_counts(n, d.min_count.unwrap_or(0), d.max_count.unwrap_or(0), data_seed);
                let mut spec = BlobSpec::new(n, d.dim.unwrap_or(0), counts, d.spread.unwrap_or(0.0), data_seed);
                spec.modes_per_class = d.modes.unwrap_or(1);
                spec.test_fraction = d.test_fraction;
                if let Some(w) = d.box_half_width {
                    spec.box_half_width = w;
                }
                if let Some(s) = d.min_separation {
                    spec.min_separation = s;
                }
                generate_blob_stream(&spec)
            }
            DataSource::Csv => {
                ingest_feature_csv(d.path.as_deref().unwrap_or(Path::new("")))?.with_test_split(d.test_fraction, seed)
            }
            DataSource::Idx => ingest_idx_images(
                d.images.as_deref().unwrap_or(Path::new("")),
                d.labels.as_deref().unwrap_or(Path::new("")),
            )?
            .with_test_split(d.test_fraction, seed),
        }
    }
}

/// Everything one (method, seed) run produced.
pub struct OnlineRun {
    /// One entry per configured top-k.
    pub metrics: Vec<RunMetrics>,
    pub audit: UsageAudit,
    pub learner: Learner,
    pub schedule: TaskSchedule,
}

/// Runs the full protocol for one method and seed on `partition`,
/// evaluating after every step. `on_step(k, learner)` is called after each
/// step's evaluation (used for checkpoints).
pub fn run_online<F>(
    partition: &StreamPartition,
    initial_classes: usize,
    step_size: usize,
    cfg: LearnerConfig,
    top_k: &[usize],
    averaging: Averaging,
    include_initial: bool,
    mut on_step: F,
) -> Result<OnlineRun>
where
    F: FnMut(usize, &Learner) -> Result<()>,
{
    let seed = cfg.seed;
    let method = cfg.method;
    let dim = partition
        .dim()
        .ok_or_else(|| Error::InvalidDataset("partition has no samples".into()))?;
    let schedule = TaskSchedule::build(&partition.classes(), initial_classes, step_size, seed)?;
    let streams = partition.task_streams(&schedule, seed)?;
    let mut learner = Learner::new(cfg, dim)?;
    let mut per_k: Vec<Vec<f64>> = vec![Vec::new(); top_k.len()];
    for (k, (classes, stream)) in schedule.tasks().zip(&streams).enumerate() {
        if k == 0 {
            learner.run_initial_task(stream, classes)?;
        } else {
            learner.run_incremental_step(stream, classes)?;
        }
        let test = partition.test_for(&schedule.seen_classes(k));
        for (acc, &kk) in per_k.iter_mut().zip(top_k) {
            acc.push(evaluate_step(&learner, &test, kk, averaging)?);
        }
        on_step(k, &learner)?;
    }
    let metrics = per_k
        .into_iter()
        .zip(top_k)
        .map(|(acc, &kk)| RunMetrics::new(method.to_string(), seed, kk, include_initial, acc))
        .collect::<Result<Vec<_>>>()?;
    Ok(OnlineRun {
        metrics,
        audit: learner.audit.clone(),
        learner,
        schedule,
    })
}

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CELL_FAILED: i32 = 1;
pub const EXIT_INVALID_CONFIG: i32 = 2;

#[derive(Clone, Debug)]
pub struct CellReport {
    pub method: Method,
    pub seed: u64,
    pub outcome: std::result::Result<Vec<RunMetrics>, String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub dir: PathBuf,
    pub cells: Vec<CellReport>,
}

impl ExperimentOutcome {
    pub fn failed(&self) -> usize {
        self.cells.iter().filter(|c| c.outcome.is_err()).count()
    }

    /// Successful runs evaluated at `top_k`, in grid order.
    pub fn runs(&self, top_k: usize) -> Vec<RunMetrics> {
        self.cells
            .iter()
            .filter_map(|c| c.outcome.as_ref().ok())
            .flatten()
            .filter(|m| m.top_k == top_k)
            .cloned()
            .collect()
    }

    pub fn exit_code(&self) -> i32 {
        if self.failed() > 0 {
            EXIT_CELL_FAILED
        } else {
            EXIT_OK
        }
    }
}

/// `$OCL_RESULTS`, or `results` in the working directory.
pub fn results_root() -> PathBuf {
    std::env::var_os(RESULTS_ENV).map_or_else(|| PathBuf::from("results"), PathBuf::from)
}

fn cell_tag(method: Method, seed: u64) -> String {
    format!("{}_s{seed}", method.to_string().replace(':', "-"))
}

fn run_cell(cfg: &ExperimentConfig, dir: &Path, method: Method, seed: u64) -> Result<Vec<RunMetrics>> {
    let partition = cfg.load_partition(seed)?;
    let lcfg = cfg.learner_config(method, seed, partition.classes().len());
    let ckpt_dir = dir.join("checkpoints").join(cell_tag(method, seed));
    if cfg.experiment.checkpoints {
        fs::create_dir_all(&ckpt_dir)?;
    }
    let run = run_online(
        &partition,
        cfg.data.initial_classes,
        cfg.data.step_size,
        lcfg,
        &cfg.experiment.top_k,
        cfg.experiment.averaging,
        cfg.experiment.include_initial,
        |k, learner| {
            if cfg.experiment.checkpoints {
                save_checkpoint(learner.model(), ckpt_dir.join(format!("step{k}")))?;
            }
            Ok(())
        },
    )?;
    if cfg.experiment.loss_trace {
        let trace_dir = dir.join("traces");
        fs::create_dir_all(&trace_dir)?;
        let mut text = String::from("step,batch,loss\n");
        for r in &run.learner.trace {
            let _ = writeln!(text, "{},{},{}", r.step, r.batch, r.loss);
        }
        fs::write(trace_dir.join(format!("{}.csv", cell_tag(method, seed))), text)?;
    }
    Ok(run.metrics)
}

/// Output directory for `cfg` below `root`. Refuses a directory whose
/// stored config differs from `cfg`.
pub fn prepare_output_dir(cfg: &ExperimentConfig, root: &Path) -> Result<PathBuf> {
    let hash = cfg.hash()?;
    let dir = root.join(format!("{}-{}", cfg.experiment.name, &hash[..16]));
    let canonical = cfg.to_toml_string()?;
    let stored = dir.join("config.toml");
    if stored.exists() {
        let existing = fs::read_to_string(&stored)?;
        if existing != canonical {
            return Err(Error::Config(format!(
                "{} holds a different config with the same hash prefix",
                dir.display()
            )));
        }
    }
    fs::create_dir_all(&dir)?;
    fs::write(&stored, canonical)?;
    Ok(dir)
}

/// Runs every (method, seed) cell with at most `jobs` in parallel and
/// writes metrics, curves, checkpoints and a report under the config's
/// output directory. Cell failures are reported, not raised.
pub fn run_grid(cfg: &ExperimentConfig, root: &Path, jobs: Option<usize>) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    let dir = prepare_output_dir(cfg, root)?;
    let cells: Vec<(Method, u64)> = cfg
        .experiment
        .methods
        .iter()
        .flat_map(|&m| cfg.experiment.seeds.iter().map(move |&s| (m, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let reports: Vec<CellReport> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(method, seed)| CellReport {
                method,
                seed,
                outcome: run_cell(cfg, &dir, method, seed).map_err(|e| e.to_string()),
            })
            .collect()
    });
    let outcome = ExperimentOutcome { dir, cells: reports };

    let mut report = String::from("method,seed,status\n");
    for c in &outcome.cells {
        let status = match &c.outcome {
            Ok(_) => "ok".to_string(),
            Err(e) => format!("failed: {}", e.replace([',', '\n'], ";")),
        };
        let _ = writeln!(report, "{},{},{status}", c.method, c.seed);
    }
    fs::write(outcome.dir.join("report.csv"), report)?;

    for &k in &cfg.experiment.top_k {
        let runs = outcome.runs(k);
        write_metrics_csv(outcome.dir.join(format!("metrics_top{k}.csv")), &runs)?;
        if !runs.is_empty() {
            write_metrics_json(outcome.dir.join(format!("metrics_top{k}.json")), &runs)?;
            write_curves(outcome.dir.join(format!("curves_top{k}")), &aggregate_by_method(&runs)?)?;
        }
    }
    Ok(outcome)
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seeds: Option<Vec<u64>>,
    pub methods: Option<Vec<Method>>,
    pub top_k: Option<Vec<usize>>,
    pub budget: Option<usize>,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = &self.seeds {
            cfg.experiment.seeds = s.clone();
        }
        if let Some(m) = &self.methods {
            cfg.experiment.methods = m.clone();
        }
        if let Some(k) = &self.top_k {
            cfg.experiment.top_k = k.clone();
        }
        if let Some(q) = self.budget {
            cfg.train.budget = q;
        }
    }
}

fn load_with(config_path: &Path, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(config_path)?;
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

/// Loads, runs and reports one experiment. Returns the process exit code.
pub fn run_experiment(config_path: &Path, overrides: &Overrides, root: &Path, jobs: Option<usize>) -> i32 {
    let cfg = match load_with(config_path, overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("invalid config: {e}");
            return EXIT_INVALID_CONFIG;
        }
    };
    match run_grid(&cfg, root, jobs) {
        Ok(outcome) => {
            for c in outcome.cells.iter().filter(|c| c.outcome.is_err()) {
                eprintln!("cell {} seed {} failed: {}", c.method, c.seed, c.outcome.as_ref().unwrap_err());
            }
            println!("{}", outcome.dir.display());
            outcome.exit_code()
        }
        Err(e) => {
            eprintln!("experiment failed: {e}");
            EXIT_CELL_FAILED
        }
    }
}

/// Avg (mean ± std over seeds) per method and budget.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub budgets: Vec<usize>,
    /// Method tag → one entry per budget (`None` if every cell failed).
    pub rows: BTreeMap<String, Vec<Option<MeanStd>>>,
    pub method_order: Vec<String>,
}

impl SweepTable {
    /// Rows are methods, columns are budgets.
    pub fn render(&self) -> String {
        let mut out = String::from("method");
        for q in &self.budgets {
            let _ = write!(out, ",q={q}");
        }
        out.push('\n');
        for m in &self.method_order {
            out.push_str(m);
            for cell in &self.rows[m] {
                match cell {
                    Some(ms) => {
                        let _ = write!(out, ",{:.4}±{:.4}", ms.mean, ms.std);
                    }
                    None => out.push_str(",failed"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// One experiment per budget (`budget` overridden, capacity scaled with it
/// unless set explicitly), then a methods × budgets Avg table.
pub fn run_budget_sweep_grid(
    cfg: &ExperimentConfig,
    budgets: &[usize],
    root: &Path,
    jobs: Option<usize>,
) -> Result<(SweepTable, i32)> {
    if budgets.is_empty() || budgets.contains(&0) {
        return Err(Error::Config("budgets must be a non-empty list of positive integers".into()));
    }
    let k = cfg.experiment.top_k[0];
    let method_order: Vec<String> = cfg.experiment.methods.iter().map(Method::to_string).collect();
    let mut rows: BTreeMap<String, Vec<Option<MeanStd>>> =
        method_order.iter().map(|m| (m.clone(), Vec::new())).collect();
    let mut code = EXIT_OK;
    for &q in budgets {
        let mut c = cfg.clone();
        c.train.budget = q;
        c.experiment.name = format!("{}-q{q}", cfg.experiment.name);
        let outcome = run_grid(&c, root, jobs)?;
        code = code.max(outcome.exit_code());
        let aggs = aggregate_by_method(&outcome.runs(k)).unwrap_or_default();
        for m in &method_order {
            let cell = aggs.iter().find(|a| &a.method == m).map(|a| a.avg);
            rows.get_mut(m).expect("row exists").push(cell);
        }
    }
    let table = SweepTable {
        budgets: budgets.to_vec(),
        rows,
        method_order,
    };
    let name = format!("{}-sweep-{}.csv", cfg.experiment.name, &cfg.hash()?[..16]);
    fs::create_dir_all(root)?;
    fs::write(root.join(name), table.render())?;
    Ok((table, code))
}

/// Loads a config and runs [`run_budget_sweep_grid`]. Returns the exit code.
pub fn run_budget_sweep(
    config_path: &Path,
    budgets: &[usize],
    overrides: &Overrides,
    root: &Path,
    jobs: Option<usize>,
) -> i32 {
    let cfg = match load_with(config_path, overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("invalid config: {e}");
            return EXIT_INVALID_CONFIG;
        }
    };
    match run_budget_sweep_grid(&cfg, budgets, root, jobs) {
        Ok((table, code)) => {
            print!("{}", table.render());
            code
        }
        Err(Error::Config(e)) => {
            eprintln!("invalid sweep: {e}");
            EXIT_INVALID_CONFIG
        }
        Err(e) => {
            eprintln!("sweep failed: {e}");
            EXIT_CELL_FAILED
        }
    }
}
