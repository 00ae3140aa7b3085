//! Experiment orchestration: single runs, repeated-seed tables, pattern-count
//! and radius sweeps, and decision-grid export. All emitted files are pure
//! functions of the experiment description.

pub mod data;

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{attack_dataset, evaluate, AttackConfig, AttackKind, Evaluation};
use crate::baseline::{gd_train, Batch, GdConfig};
use crate::error::{Error, Result};
use crate::model::{forward_row, predict_class, regularized_objective, Dataset, LossKind, NetworkWeights, Task};
use crate::patterns::SamplerConfig;
use crate::solver::SolveSettings;
use crate::trainer::{train_adversarial, train_standard, RunStatus, TrainedModel};

use data::{gen_staircase, gen_toy, gen_toy2d_sized, ingest_csv, ingest_csv_reader, IngestOptions, ToyName, MASSES_STANDIN};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DatasetSpec {
    Toy1d,
    Toy2d,
    Staircase,
    /// `n` uniform points in [−2, 2]² with the toy2d label rule.
    Points2d {
        n: usize,
    },
    /// The bundled mammographic-masses stand-in, split and standardized like a CSV.
    Masses {
        train_frac: f64,
    },
    Csv {
        path: PathBuf,
        label_col: String,
        train_frac: f64,
        standardize: bool,
        task: Task,
    },
}

impl DatasetSpec {
    pub fn task(&self) -> Task {
        match self {
            Self::Toy1d | Self::Toy2d | Self::Points2d { .. } | Self::Masses { .. } => Task::Binary,
            Self::Staircase => Task::Regression,
            Self::Csv { task, .. } => *task,
        }
    }

    /// Train and test sets for one run seed. Generated classification sets
    /// are evaluated on their own training points.
    pub fn load(&self, seed: u64) -> Result<(Dataset, Dataset)> {
        match self {
            Self::Toy1d => {
                let d = gen_toy(ToyName::Toy1d, seed)?;
                Ok((d.clone(), d))
            }
            Self::Toy2d => {
                let d = gen_toy(ToyName::Toy2d, seed)?;
                Ok((d.clone(), d))
            }
            Self::Staircase => gen_staircase(seed),
            Self::Points2d { n } => {
                let d = gen_toy2d_sized(*n, seed)?;
                Ok((d.clone(), d))
            }
            Self::Masses { train_frac } => {
                let split = ingest_csv_reader(
                    MASSES_STANDIN.as_bytes(),
                    &IngestOptions {
                        label_col: "severity".into(),
                        train_frac: *train_frac,
                        standardize: true,
                        seed,
                        task: Task::Binary,
                    },
                )?;
                Ok((split.train, split.test))
            }
            Self::Csv {
                path,
                label_col,
                train_frac,
                standardize,
                task,
            } => {
                if !path.exists() {
                    return Err(Error::InvalidArgument(format!("{} does not exist", path.display())));
                }
                let split = ingest_csv(
                    path,
                    &IngestOptions {
                        label_col: label_col.clone(),
                        train_frac: *train_frac,
                        standardize: *standardize,
                        seed,
                        task: *task,
                    },
                )?;
                Ok((split.train, split.test))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Alg1,
    Alg2,
    GdStd,
    GdFgsm,
    GdPgd,
}

impl MethodName {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "alg1" => Ok(Self::Alg1),
            "alg2" => Ok(Self::Alg2),
            "gd_std" | "gd-std" => Ok(Self::GdStd),
            "gd_fgsm" | "gd-fgsm" => Ok(Self::GdFgsm),
            "gd_pgd" | "gd-pgd" => Ok(Self::GdPgd),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Alg1 => "alg1",
            Self::Alg2 => "alg2",
            Self::GdStd => "gd_std",
            Self::GdFgsm => "gd_fgsm",
            Self::GdPgd => "gd_pgd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasMode {
    None,
    /// Constant-one column that adversaries may perturb.
    Perturbed,
    /// Constant-one column that adversaries leave untouched.
    Frozen,
}

impl BiasMode {
    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "none" => Ok(Self::None),
            "perturbed" => Ok(Self::Perturbed),
            "frozen" => Ok(Self::Frozen),
            other => Err(Error::InvalidArgument(format!("unknown bias mode {other:?}"))),
        }
    }

    pub fn apply(&self, data: &Dataset) -> Dataset {
        match self {
            Self::None => data.clone(),
            Self::Perturbed => data.with_bias(false),
            Self::Frozen => data.with_bias(true),
        }
    }
}

/// Gradient-descent settings; the width defaults to 2·P_s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdSettings {
    pub width: Option<usize>,
    pub epochs: usize,
    pub lr: f64,
    pub batch: Batch,
    pub init_scale: Option<f64>,
}

impl Default for GdSettings {
    fn default() -> Self {
        let base = GdConfig::for_patterns(1, 0);
        Self {
            width: None,
            epochs: base.epochs,
            lr: base.lr,
            batch: base.batch,
            init_scale: base.init_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub dataset: DatasetSpec,
    pub method: MethodName,
    pub loss: LossKind,
    pub bias: BiasMode,
    pub beta: f64,
    pub eps: f64,
    pub ps: usize,
    pub pa: usize,
    pub s: usize,
    pub gd: GdSettings,
    pub solver: SolveSettings,
    pub repeats: usize,
    pub seed: u64,
    /// Thread count for independent runs; results never depend on it, so it
    /// is left out of artifacts.
    #[serde(skip)]
    pub workers: Option<usize>,
    #[serde(skip)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    /// Defaults for a dataset: hinge loss for classification, squared loss for
    /// regression, β = 1e-4, P_s = 120, S = 10 and P_a = P_s.
    pub fn new(dataset: DatasetSpec, method: MethodName) -> Self {
        let loss = match dataset.task() {
            Task::Binary => LossKind::HINGE,
            Task::Regression => LossKind::Squared,
        };
        Self {
            dataset,
            method,
            loss,
            bias: BiasMode::Perturbed,
            beta: 1e-4,
            eps: 0.0,
            ps: 120,
            pa: 120,
            s: 10,
            gd: GdSettings::default(),
            solver: SolveSettings::default(),
            repeats: 1,
            seed: 0,
            workers: None,
            output_dir: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::InvalidArgument("repeats must be >= 1".into()));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidArgument(format!("beta must be >= 0, got {}", self.beta)));
        }
        if !(self.eps >= 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("eps must be >= 0, got {}", self.eps)));
        }
        if self.loss.is_hinge() && self.dataset.task() != Task::Binary {
            return Err(Error::InvalidArgument("hinge loss needs a binary dataset".into()));
        }
        if let DatasetSpec::Csv { path, .. } = &self.dataset {
            if !path.exists() {
                return Err(Error::InvalidArgument(format!("{} does not exist", path.display())));
            }
        }
        if self.workers == Some(0) {
            return Err(Error::InvalidArgument("workers must be >= 1".into()));
        }
        self.solver.validate()?;
        self.loss.validate()
    }

    /// Seed of repeat `r`.
    pub fn run_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }

    pub fn attack_config(&self, kind: AttackKind) -> AttackConfig {
        AttackConfig::new(self.eps, kind)
    }

    fn sampler(&self, seed: u64) -> SamplerConfig {
        match self.method {
            MethodName::Alg2 => SamplerConfig::adversarial(self.ps, self.pa, self.s, self.eps, seed),
            _ => SamplerConfig::standard(self.ps, seed),
        }
    }

    fn gd_config(&self, seed: u64) -> GdConfig {
        GdConfig {
            m: self.gd.width.unwrap_or(2 * self.ps),
            epochs: self.gd.epochs,
            lr: self.gd.lr,
            batch: self.gd.batch,
            seed,
            init_scale: self.gd.init_scale,
        }
    }
}

/// Network plus everything needed to interpret and replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub version: String,
    pub spec: ExperimentSpec,
    pub seed: u64,
    pub task: Task,
    pub bias: BiasMode,
    pub status: RunStatus,
    /// Solver objective for convex methods; for gradient descent, the final
    /// regularized objective on the (attacked, for adversarial variants)
    /// training inputs.
    pub objective: f64,
    pub weights: NetworkWeights,
    pub convex: Option<TrainedModel>,
}

impl ModelArtifact {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Applies the model's bias convention to raw features.
    pub fn prepare(&self, data: &Dataset) -> Dataset {
        if data.bias_appended() {
            data.clone()
        } else {
            self.bias.apply(data)
        }
    }
}

/// Trains one model on `train` (raw features; the bias column is added here).
pub fn train_model(spec: &ExperimentSpec, train: &Dataset, seed: u64) -> Result<ModelArtifact> {
    let data = spec.bias.apply(train);
    let (weights, objective, status, convex) = match spec.method {
        MethodName::Alg1 | MethodName::Alg2 => {
            let sampler = spec.sampler(seed);
            let model = if spec.method == MethodName::Alg1 {
                train_standard(&data, spec.beta, &sampler, spec.loss, &spec.solver)?
            } else {
                train_adversarial(&data, spec.beta, spec.eps, &sampler, spec.loss, &spec.solver)?
            };
            (model.weights.clone(), model.meta.solve.objective, model.meta.status, Some(model))
        }
        MethodName::GdStd | MethodName::GdFgsm | MethodName::GdPgd => {
            let adversary = match spec.method {
                MethodName::GdFgsm => Some(spec.attack_config(AttackKind::Fgsm)),
                MethodName::GdPgd => Some(spec.attack_config(AttackKind::Pgd)),
                _ => None,
            };
            let config = spec.gd_config(seed);
            let weights = gd_train(&data, spec.beta, spec.loss, &config, adversary.as_ref())?;
            let inputs = match &adversary {
                Some(a) => attack_dataset(&weights, &data, a, spec.loss)?,
                None => data.clone(),
            };
            let objective = regularized_objective(&weights, &inputs, spec.beta, spec.loss)?;
            (weights, objective, RunStatus::Ok, None)
        }
    };
    Ok(ModelArtifact {
        version: VERSION.into(),
        spec: spec.clone(),
        seed,
        task: data.task(),
        bias: spec.bias,
        status,
        objective,
        weights,
        convex,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub status: RunStatus,
    pub objective: f64,
    pub neurons: usize,
    pub train: Evaluation,
    pub test: Evaluation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub seed: u64,
    pub error: String,
}

/// One seed of an experiment: load data, train, evaluate on both splits.
pub fn run_once(spec: &ExperimentSpec, seed: u64) -> Result<RunRecord> {
    let (train, test) = spec.dataset.load(seed)?;
    let model = train_model(spec, &train, seed)?;
    let config = spec.attack_config(AttackKind::Pgd);
    Ok(RunRecord {
        seed,
        status: model.status,
        objective: model.objective,
        neurons: model.weights.width(),
        train: evaluate(&model.weights, &model.prepare(&train), &config, spec.loss)?,
        test: evaluate(&model.weights, &model.prepare(&test), &config, spec.loss)?,
    })
}

/// Runs `f` over `items` on up to `workers` threads, returning results in input order.
fn parallel_map<T: Sync, R: Send>(workers: Option<usize>, items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Result<Vec<R>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation; NaN for an empty sample.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub const TABLE_METRICS: [&str; 8] = [
    "test_clean",
    "test_fgsm",
    "test_pgd",
    "train_clean",
    "train_pgd",
    "objective",
    "test_pgd_loss",
    "neurons",
];

fn metric(run: &RunRecord, name: &str) -> f64 {
    match name {
        "test_clean" => run.test.clean,
        "test_fgsm" => run.test.fgsm,
        "test_pgd" => run.test.pgd,
        "train_clean" => run.train.clean,
        "train_pgd" => run.train.pgd,
        "objective" => run.objective,
        "test_pgd_loss" => run.test.pgd_loss,
        "neurons" => run.neurons as f64,
        _ => unreachable!("unknown metric {name}"),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableReport {
    pub version: String,
    pub spec: ExperimentSpec,
    pub runs: Vec<RunRecord>,
    pub failures: Vec<RunFailure>,
    /// Aggregates over runs whose solver certified optimality.
    pub summary: Vec<Stat>,
    pub degraded: usize,
}

impl TableReport {
    pub fn stat(&self, metric: &str) -> Option<&Stat> {
        self.summary.iter().find(|s| s.metric == metric)
    }
}

/// Repeats a method over `repeats` seeds and aggregates clean, FGSM and PGD
/// metrics. Degraded and failed runs are listed but not aggregated.
pub fn run_table(spec: &ExperimentSpec) -> Result<TableReport> {
    spec.validate()?;
    let seeds: Vec<u64> = (0..spec.repeats).map(|r| spec.run_seed(r)).collect();
    let results = parallel_map(spec.workers, &seeds, |&seed| run_once(spec, seed))?;
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (seed, result) in seeds.iter().zip(results) {
        match result {
            Ok(run) => runs.push(run),
            Err(e) => failures.push(RunFailure {
                seed: *seed,
                error: e.to_string(),
            }),
        }
    }
    let kept: Vec<&RunRecord> = runs.iter().filter(|r| r.status == RunStatus::Ok).collect();
    let summary = TABLE_METRICS
        .iter()
        .map(|&name| {
            let values: Vec<f64> = kept.iter().map(|r| metric(r, name)).collect();
            let (mean, std) = mean_std(&values);
            Stat {
                metric: name.into(),
                mean,
                std,
            }
        })
        .collect();
    Ok(TableReport {
        version: VERSION.into(),
        spec: spec.clone(),
        degraded: runs.len() - kept.len(),
        runs,
        failures,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    /// P_s for pattern sweeps, ε for radius sweeps.
    pub x: f64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsSweepReport {
    pub version: String,
    pub beta: f64,
    pub loss: LossKind,
    pub ps_list: Vec<usize>,
    pub repeats: usize,
    pub seed: u64,
    pub solver: SolveSettings,
    /// Optimized objective of every (P_s, repeat) pair; degraded runs are NaN.
    pub values: Vec<Vec<f64>>,
    pub curve: Vec<CurvePoint>,
}

fn curve_point(x: f64, values: &[f64]) -> CurvePoint {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    let (mean, _) = mean_std(&finite);
    CurvePoint {
        x,
        mean,
        min: finite.iter().copied().fold(f64::NAN, f64::min),
        max: finite.iter().copied().fold(f64::NAN, f64::max),
        runs: finite.len(),
    }
}

/// Standard training on a fixed dataset for every P_s in `ps_list`, each
/// repeated with sampler seeds `seed, seed+1, …`.
pub fn run_ps_sweep(
    data: &Dataset,
    beta: f64,
    loss: LossKind,
    ps_list: &[usize],
    repeats: usize,
    seed: u64,
    solver: &SolveSettings,
    workers: Option<usize>,
) -> Result<PsSweepReport> {
    if repeats == 0 || ps_list.is_empty() {
        return Err(Error::InvalidArgument("need at least one P_s and one repeat".into()));
    }
    if ps_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("P_s list must be strictly ascending".into()));
    }
    let jobs: Vec<(usize, u64)> = ps_list
        .iter()
        .flat_map(|&ps| (0..repeats).map(move |r| (ps, seed.wrapping_add(r as u64))))
        .collect();
    let results = parallel_map(workers, &jobs, |&(ps, s)| {
        let model = train_standard(data, beta, &SamplerConfig::standard(ps, s), loss, solver)?;
        Ok::<f64, Error>(if model.is_degraded() {
            f64::NAN
        } else {
            model.meta.solve.objective
        })
    })?;
    let results: Vec<f64> = results.into_iter().collect::<Result<_>>()?;
    let values: Vec<Vec<f64>> = results.chunks(repeats).map(|c| c.to_vec()).collect();
    let curve = ps_list
        .iter()
        .zip(&values)
        .map(|(&ps, v)| curve_point(ps as f64, v))
        .collect();
    Ok(PsSweepReport {
        version: VERSION.into(),
        beta,
        loss,
        ps_list: ps_list.to_vec(),
        repeats,
        seed,
        solver: *solver,
        values,
        curve,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsSweepSpec {
    pub eps_list: Vec<f64>,
    /// Trials per radius for adversarial training.
    pub trials: usize,
    /// Trials for the standard-training baseline.
    pub standard_trials: usize,
    pub beta: f64,
    pub ps: usize,
    pub pa: usize,
    pub s: usize,
    pub bias: BiasMode,
    pub seed: u64,
    pub solver: SolveSettings,
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for EpsSweepSpec {
    /// Radii 0.1, …, 0.9 with 10 trials each against 100 standard trials.
    fn default() -> Self {
        Self {
            eps_list: (1..=9).map(|k| k as f64 / 10.0).collect(),
            trials: 10,
            standard_trials: 100,
            beta: 1e-4,
            ps: 40,
            pa: 40,
            s: 10,
            bias: BiasMode::Perturbed,
            seed: 0,
            solver: SolveSettings::default(),
            workers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsSweepReport {
    pub version: String,
    pub spec: EpsSweepSpec,
    /// Test MSE of standard training, one entry per trial (NaN if degraded).
    pub standard: Vec<f64>,
    pub standard_mean: f64,
    /// Test MSE of adversarial training per radius and trial.
    pub adversarial: Vec<Vec<f64>>,
    pub curve: Vec<CurvePoint>,
}

impl EpsSweepReport {
    /// Radius with the lowest mean adversarial test MSE.
    pub fn argmin_eps(&self) -> Option<f64> {
        self.curve
            .iter()
            .filter(|p| p.mean.is_finite())
            .min_by(|a, b| a.mean.total_cmp(&b.mean))
            .map(|p| p.x)
    }
}

fn staircase_trial(spec: &EpsSweepSpec, eps: Option<f64>, trial: usize) -> Result<f64> {
    let seed = spec.seed.wrapping_add(trial as u64);
    let (train, test) = gen_staircase(seed)?;
    let train = spec.bias.apply(&train);
    let test = spec.bias.apply(&test);
    let model = match eps {
        None => train_standard(&train, spec.beta, &SamplerConfig::standard(spec.ps, seed), LossKind::Squared, &spec.solver)?,
        Some(eps) => train_adversarial(
            &train,
            spec.beta,
            eps,
            &SamplerConfig::adversarial(spec.ps, spec.pa, spec.s, eps, seed),
            LossKind::Squared,
            &spec.solver,
        )?,
    };
    if model.is_degraded() {
        return Ok(f64::NAN);
    }
    let mut sse = 0.0;
    for (row, y) in test.x().iter_rows().zip(test.y()) {
        let e = forward_row(&model.weights, row) - y;
        sse += e * e;
    }
    Ok(sse / test.n() as f64)
}

/// Staircase regression: test MSE of squared-loss adversarial training for
/// each radius, against standard training. Trial t of every method uses the
/// same train/test draw.
pub fn run_eps_sweep_regression(spec: &EpsSweepSpec) -> Result<EpsSweepReport> {
    if spec.eps_list.is_empty() || spec.trials == 0 || spec.standard_trials == 0 {
        return Err(Error::InvalidArgument("need at least one radius and one trial".into()));
    }
    if spec.eps_list.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
        return Err(Error::InvalidArgument("radii must be finite and >= 0".into()));
    }
    let mut jobs: Vec<(Option<f64>, usize)> = (0..spec.standard_trials).map(|t| (None, t)).collect();
    for &eps in &spec.eps_list {
        jobs.extend((0..spec.trials).map(|t| (Some(eps), t)));
    }
    let results = parallel_map(spec.workers, &jobs, |&(eps, t)| staircase_trial(spec, eps, t))?;
    let results: Vec<f64> = results.into_iter().collect::<Result<_>>()?;
    let (standard, rest) = results.split_at(spec.standard_trials);
    let adversarial: Vec<Vec<f64>> = rest.chunks(spec.trials).map(|c| c.to_vec()).collect();
    let curve = spec
        .eps_list
        .iter()
        .zip(&adversarial)
        .map(|(&eps, v)| curve_point(eps, v))
        .collect();
    Ok(EpsSweepReport {
        version: VERSION.into(),
        spec: spec.clone(),
        standard_mean: curve_point(0.0, standard).mean,
        standard: standard.to_vec(),
        adversarial,
        curve,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridBounds {
    pub lo: [f64; 2],
    pub hi: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Feature count without the bias column: 1 or 2.
    pub features: usize,
    pub bias: bool,
    pub bounds: GridBounds,
    pub resolution: usize,
}

/// Grid values: the predicted class for classification, ŷ for regression.
/// The grid covers the bounds with `resolution` points per axis (first axis
/// outermost); with a bias, a one is appended to every point.
pub fn decision_grid(weights: &NetworkWeights, task: Task, grid: &GridSpec) -> Result<Vec<(Vec<f64>, f64)>> {
    let GridSpec {
        features: d,
        bias,
        bounds,
        resolution,
    } = *grid;
    if resolution < 2 {
        return Err(Error::InvalidArgument("grid resolution must be >= 2".into()));
    }
    if !(d == 1 || d == 2) {
        return Err(Error::InvalidArgument(format!("decision grids need 1 or 2 features, got {d}")));
    }
    let input = d + usize::from(bias);
    if weights.input_dim().is_some_and(|i| i != input) {
        return Err(Error::Dimension(format!(
            "model takes {} inputs, the grid has {input}",
            weights.input_dim().unwrap_or(0)
        )));
    }
    let axis = |a: usize, i: usize| bounds.lo[a] + (bounds.hi[a] - bounds.lo[a]) * i as f64 / (resolution - 1) as f64;
    let cells = resolution.pow(d as u32);
    let mut rows = Vec::with_capacity(cells);
    for c in 0..cells {
        let coords: Vec<f64> = if d == 1 {
            vec![axis(0, c)]
        } else {
            vec![axis(0, c / resolution), axis(1, c % resolution)]
        };
        let mut point = coords.clone();
        if bias {
            point.push(1.0);
        }
        let yhat = forward_row(weights, &point);
        let value = match task {
            Task::Binary => predict_class(yhat),
            Task::Regression => yhat,
        };
        rows.push((coords, value));
    }
    Ok(rows)
}

/// Writes [`decision_grid`] as CSV with header `x1[,x2],value`.
pub fn export_decision_grid(weights: &NetworkWeights, task: Task, grid: &GridSpec, out: impl Write) -> Result<()> {
    let rows = decision_grid(weights, task, grid)?;
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=grid.features).map(|j| format!("x{j}")).collect();
    header.push("value".into());
    w.write_record(&header)?;
    for (coords, value) in rows {
        let mut record: Vec<String> = coords.iter().map(|v| v.to_string()).collect();
        record.push(value.to_string());
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the table report as `<stem>.json`, `<stem>_runs.csv` and `<stem>_summary.csv`.
pub fn write_table(report: &TableReport, dir: &Path, stem: &str) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let json = dir.join(format!("{stem}.json"));
    std::fs::write(&json, serde_json::to_string_pretty(report)? + "\n")?;
    let runs = dir.join(format!("{stem}_runs.csv"));
    let mut w = csv::Writer::from_path(&runs)?;
    let mut header = vec!["seed".to_string(), "status".to_string()];
    header.extend(TABLE_METRICS.iter().map(|m| m.to_string()));
    w.write_record(&header)?;
    for run in &report.runs {
        let mut record = vec![run.seed.to_string(), format!("{:?}", run.status).to_lowercase()];
        record.extend(TABLE_METRICS.iter().map(|m| metric(run, m).to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    let summary = dir.join(format!("{stem}_summary.csv"));
    let mut w = csv::Writer::from_path(&summary)?;
    w.write_record(["metric", "mean", "std"])?;
    for s in &report.summary {
        w.write_record([s.metric.clone(), s.mean.to_string(), s.std.to_string()])?;
    }
    w.flush()?;
    Ok(vec![json, runs, summary])
}

/// Writes a curve as CSV with header `<x_name>,mean,min,max,runs`.
pub fn write_curve(curve: &[CurvePoint], x_name: &str, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([x_name, "mean", "min", "max", "runs"])?;
    for p in curve {
        w.write_record([
            p.x.to_string(),
            p.mean.to_string(),
            p.min.to_string(),
            p.max.to_string(),
            p.runs.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
