use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use relucvx::attacks::{evaluate, AttackConfig, AttackKind};
use relucvx::baseline::Batch;
use relucvx::experiments::data::{ingest_csv, read_dataset_csv, write_dataset_csv, IngestOptions};
use relucvx::experiments::{
    export_decision_grid, run_eps_sweep_regression, run_ps_sweep, run_table, train_model, write_curve, write_table,
    BiasMode, DatasetSpec, EpsSweepSpec, ExperimentSpec, GdSettings, GridBounds, GridSpec, MethodName, ModelArtifact,
};
use relucvx::solver::{Algorithm, SolveSettings};
use relucvx::{Error, LossKind, Result, Task};

#[derive(Parser)]
#[command(name = "relucvx", version, about = "Convex and adversarially robust training of two-layer ReLU networks")]
struct Cli {
    /// Directory for all outputs.
    #[arg(long, global = true, env = "RELUCVX_OUT_DIR", default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model and write model.json.
    Train(ExperimentArgs),
    /// Evaluate a saved model against clean, FGSM and PGD inputs.
    Attack(AttackArgs),
    /// Repeat a method over seeds and write mean/std tables.
    Table(ExperimentArgs),
    /// Optimized loss of standard training against the number of patterns.
    PsSweep(PsSweepArgs),
    /// Staircase regression test MSE against the perturbation radius.
    EpsSweep(EpsSweepArgs),
    /// Predictions of a saved model on a regular grid.
    Grid(GridArgs),
    /// Clean, split and standardize a CSV into dataset files.
    Ingest(IngestArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DatasetArg {
    Toy1d,
    Toy2d,
    Staircase,
    Points2d,
    Masses,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Alg1,
    Alg2,
    GdStd,
    GdFgsm,
    GdPgd,
}

#[derive(Clone, Copy, ValueEnum)]
enum BiasArg {
    None,
    Perturbed,
    Frozen,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Binary,
    Regression,
}

#[derive(Clone, Copy, ValueEnum)]
enum LossArg {
    Hinge,
    Squared,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Ipm,
    Admm,
}

#[derive(Clone, Copy, ValueEnum)]
enum AttackArg {
    Fgsm,
    Pgd,
    Hinge,
    Vertex,
}

#[derive(Args, Clone)]
struct DataArgs {
    #[arg(long, value_enum, default_value = "toy2d")]
    dataset: DatasetArg,
    /// Input CSV for --dataset csv.
    #[arg(long)]
    csv_path: Option<PathBuf>,
    #[arg(long, default_value = "label")]
    label_col: String,
    #[arg(long, default_value_t = 0.7)]
    train_frac: f64,
    #[arg(long)]
    no_standardize: bool,
    #[arg(long, value_enum, default_value = "binary")]
    task: TaskArg,
    /// Point count for --dataset points2d.
    #[arg(long, default_value_t = 40)]
    points: usize,
}

impl DataArgs {
    fn spec(&self) -> Result<DatasetSpec> {
        Ok(match self.dataset {
            DatasetArg::Toy1d => DatasetSpec::Toy1d,
            DatasetArg::Toy2d => DatasetSpec::Toy2d,
            DatasetArg::Staircase => DatasetSpec::Staircase,
            DatasetArg::Points2d => DatasetSpec::Points2d { n: self.points },
            DatasetArg::Masses => DatasetSpec::Masses {
                train_frac: self.train_frac,
            },
            DatasetArg::Csv => DatasetSpec::Csv {
                path: self
                    .csv_path
                    .clone()
                    .ok_or_else(|| Error::InvalidArgument("--dataset csv needs --csv-path".into()))?,
                label_col: self.label_col.clone(),
                train_frac: self.train_frac,
                standardize: !self.no_standardize,
                task: task(self.task),
            },
        })
    }
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 1e-8)]
    tol_gap: f64,
    #[arg(long, default_value_t = 1e-8)]
    tol_feas: f64,
    #[arg(long, default_value_t = 20000)]
    max_iter: usize,
    #[arg(long, value_enum, default_value = "ipm")]
    solver: SolverArg,
    /// Print solver progress to stderr.
    #[arg(long)]
    verbose: bool,
}

impl SolverArgs {
    fn settings(&self) -> SolveSettings {
        SolveSettings {
            tol_gap: self.tol_gap,
            tol_feas: self.tol_feas,
            max_iter: self.max_iter,
            algorithm: match self.solver {
                SolverArg::Ipm => Algorithm::InteriorPoint,
                SolverArg::Admm => Algorithm::OperatorSplitting,
            },
            verbose: self.verbose,
            ..SolveSettings::default()
        }
    }
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "alg1")]
    method: MethodArg,
    /// Defaults to hinge for binary data and squared for regression.
    #[arg(long, value_enum)]
    loss: Option<LossArg>,
    #[arg(long, value_enum, default_value = "perturbed")]
    bias: BiasArg,
    #[arg(long, default_value_t = 1e-4)]
    beta: f64,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Number of distinct activation patterns.
    #[arg(long, default_value_t = 120)]
    ps: usize,
    /// Directions drawn by adversarial sampling; defaults to P_s.
    #[arg(long)]
    pa: Option<usize>,
    /// Masks per direction in adversarial sampling.
    #[arg(long, default_value_t = 10)]
    s: usize,
    /// Gradient-descent width; defaults to 2·P_s.
    #[arg(long)]
    gd_width: Option<usize>,
    #[arg(long, default_value_t = 2000)]
    gd_epochs: usize,
    #[arg(long, default_value_t = 1e-2)]
    gd_lr: f64,
    /// Mini-batch size; full batch when absent.
    #[arg(long)]
    gd_batch: Option<usize>,
    /// Initial weight standard deviation; 1/√d when absent.
    #[arg(long)]
    gd_init_scale: Option<f64>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for independent runs.
    #[arg(long)]
    workers: Option<usize>,
    /// Stem of the output files.
    #[arg(long)]
    name: Option<String>,
}

impl ExperimentArgs {
    fn spec(&self, out_dir: &Path) -> Result<ExperimentSpec> {
        let dataset = self.data.spec()?;
        let mut spec = ExperimentSpec::new(dataset, method(self.method));
        if let Some(l) = self.loss {
            spec.loss = match l {
                LossArg::Hinge => LossKind::HINGE,
                LossArg::Squared => LossKind::Squared,
            };
        }
        spec.bias = bias(self.bias);
        spec.beta = self.beta;
        spec.eps = self.eps;
        spec.ps = self.ps;
        spec.pa = self.pa.unwrap_or(self.ps);
        spec.s = self.s;
        spec.gd = GdSettings {
            width: self.gd_width,
            epochs: self.gd_epochs,
            lr: self.gd_lr,
            batch: self.gd_batch.map_or(Batch::Full, Batch::Size),
            init_scale: self.gd_init_scale,
        };
        spec.solver = self.solver.settings();
        spec.repeats = self.repeats;
        spec.seed = self.seed;
        spec.workers = self.workers;
        spec.output_dir = Some(out_dir.to_path_buf());
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args)]
struct AttackArgs {
    /// Model JSON written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Dataset CSV as written by `ingest`; the model's dataset test split when absent.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Radius; the model's training radius when absent.
    #[arg(long)]
    eps: Option<f64>,
    /// Attack whose inputs are written next to the evaluation.
    #[arg(long, value_enum, default_value = "pgd")]
    kind: AttackArg,
    #[arg(long, default_value = "attack")]
    name: String,
}

#[derive(Args)]
struct PsSweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum, default_value = "none")]
    bias: BiasArg,
    #[arg(long, default_value_t = 1e-4)]
    beta: f64,
    /// Comma-separated ascending P_s values.
    #[arg(long, value_delimiter = ',', default_value = "4,8,16,32,64,128,256,512,1024,2048")]
    ps: Vec<usize>,
    #[arg(long, default_value_t = 15)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Seed of the dataset draw.
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "ps_sweep")]
    name: String,
}

#[derive(Args)]
struct EpsSweepArgs {
    /// Comma-separated radii.
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")]
    eps: Vec<f64>,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 100)]
    standard_trials: usize,
    #[arg(long, default_value_t = 1e-4)]
    beta: f64,
    #[arg(long, default_value_t = 40)]
    ps: usize,
    #[arg(long)]
    pa: Option<usize>,
    #[arg(long, default_value_t = 10)]
    s: usize,
    #[arg(long, value_enum, default_value = "perturbed")]
    bias: BiasArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, default_value = "eps_sweep")]
    name: String,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    model: PathBuf,
    /// Lower corner, one value per feature.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "-2,-2")]
    lo: Vec<f64>,
    /// Upper corner, one value per feature.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "2,2")]
    hi: Vec<f64>,
    #[arg(long, default_value_t = 101)]
    resolution: usize,
    #[arg(long, default_value = "grid")]
    name: String,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    csv_path: PathBuf,
    #[arg(long, default_value = "label")]
    label_col: String,
    #[arg(long, default_value_t = 0.7)]
    train_frac: f64,
    #[arg(long)]
    no_standardize: bool,
    #[arg(long, value_enum, default_value = "binary")]
    task: TaskArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "ingest")]
    name: String,
}

fn method(m: MethodArg) -> MethodName {
    match m {
        MethodArg::Alg1 => MethodName::Alg1,
        MethodArg::Alg2 => MethodName::Alg2,
        MethodArg::GdStd => MethodName::GdStd,
        MethodArg::GdFgsm => MethodName::GdFgsm,
        MethodArg::GdPgd => MethodName::GdPgd,
    }
}

fn bias(b: BiasArg) -> BiasMode {
    match b {
        BiasArg::None => BiasMode::None,
        BiasArg::Perturbed => BiasMode::Perturbed,
        BiasArg::Frozen => BiasMode::Frozen,
    }
}

fn task(t: TaskArg) -> Task {
    match t {
        TaskArg::Binary => Task::Binary,
        TaskArg::Regression => Task::Regression,
    }
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn report(paths: &[PathBuf]) {
    for p in paths {
        println!("wrote {}", p.display());
    }
}

fn train(args: &ExperimentArgs, out: &Path) -> Result<()> {
    let spec = args.spec(out)?;
    let (train, _) = spec.dataset.load(spec.seed)?;
    let model = train_model(&spec, &train, spec.seed)?;
    let path = out.join(format!("{}.json", args.name.as_deref().unwrap_or("model")));
    std::fs::write(&path, model.to_json()?)?;
    println!(
        "{} {:?} objective {} neurons {}",
        spec.method.name(),
        model.status,
        model.objective,
        model.weights.width()
    );
    report(&[path]);
    Ok(())
}

fn attack(args: &AttackArgs, out: &Path) -> Result<()> {
    let model = ModelArtifact::from_json(&std::fs::read_to_string(&args.model)?)?;
    let data = match &args.data {
        Some(path) => read_dataset_csv(File::open(path)?)?,
        None => model.spec.dataset.load(model.seed)?.1,
    };
    let data = model.prepare(&data);
    let eps = args.eps.unwrap_or(model.spec.eps);
    let kind = match args.kind {
        AttackArg::Fgsm => AttackKind::Fgsm,
        AttackArg::Pgd => AttackKind::Pgd,
        AttackArg::Hinge => AttackKind::HingeClosedForm,
        AttackArg::Vertex => AttackKind::VertexOracle,
    };
    let config = AttackConfig::new(eps, AttackKind::Pgd);
    let eval = evaluate(&model.weights, &data, &config, model.spec.loss)?;
    let json = out.join(format!("{}.json", args.name));
    write_json(&json, &eval)?;
    let attacked = relucvx::attacks::attack_dataset(&model.weights, &data, &AttackConfig::new(eps, kind), model.spec.loss)?;
    let csv = out.join(format!("{}_inputs.csv", args.name));
    write_dataset_csv(&attacked, BufWriter::new(File::create(&csv)?))?;
    println!("clean {} fgsm {} pgd {}", eval.clean, eval.fgsm, eval.pgd);
    report(&[json, csv]);
    Ok(())
}

fn table(args: &ExperimentArgs, out: &Path) -> Result<()> {
    let spec = args.spec(out)?;
    let report_data = run_table(&spec)?;
    for s in &report_data.summary {
        println!("{:>14} {:.6} ± {:.6}", s.metric, s.mean, s.std);
    }
    for f in &report_data.failures {
        eprintln!("seed {} failed: {}", f.seed, f.error);
    }
    let default_name = format!("table_{}", spec.method.name());
    let paths = write_table(&report_data, out, args.name.as_deref().unwrap_or(&default_name))?;
    report(&paths);
    Ok(())
}

fn ps_sweep(args: &PsSweepArgs, out: &Path) -> Result<()> {
    let dataset = args.data.spec()?;
    let (train, _) = dataset.load(args.data_seed)?;
    let train = bias(args.bias).apply(&train);
    let loss = match train.task() {
        Task::Binary => LossKind::HINGE,
        Task::Regression => LossKind::Squared,
    };
    let settings = args.solver.settings();
    let sweep = run_ps_sweep(&train, args.beta, loss, &args.ps, args.repeats, args.seed, &settings, args.workers)?;
    let csv = out.join(format!("{}.csv", args.name));
    write_curve(&sweep.curve, "ps", BufWriter::new(File::create(&csv)?))?;
    let json = out.join(format!("{}.json", args.name));
    write_json(&json, &serde_json::json!({ "dataset": dataset, "data_seed": args.data_seed, "bias": bias(args.bias), "sweep": sweep }))?;
    report(&[csv, json]);
    Ok(())
}

fn eps_sweep(args: &EpsSweepArgs, out: &Path) -> Result<()> {
    let spec = EpsSweepSpec {
        eps_list: args.eps.clone(),
        trials: args.trials,
        standard_trials: args.standard_trials,
        beta: args.beta,
        ps: args.ps,
        pa: args.pa.unwrap_or(args.ps),
        s: args.s,
        bias: bias(args.bias),
        seed: args.seed,
        solver: args.solver.settings(),
        workers: args.workers,
    };
    let sweep = run_eps_sweep_regression(&spec)?;
    println!("standard mean test MSE {}", sweep.standard_mean);
    for p in &sweep.curve {
        println!("eps {} mean test MSE {}", p.x, p.mean);
    }
    let csv = out.join(format!("{}.csv", args.name));
    write_curve(&sweep.curve, "eps", BufWriter::new(File::create(&csv)?))?;
    let json = out.join(format!("{}.json", args.name));
    write_json(&json, &sweep)?;
    report(&[csv, json]);
    Ok(())
}

fn grid(args: &GridArgs, out: &Path) -> Result<()> {
    let model = ModelArtifact::from_json(&std::fs::read_to_string(&args.model)?)?;
    let features = args.lo.len();
    if args.hi.len() != features || !(features == 1 || features == 2) {
        return Err(Error::InvalidArgument("--lo and --hi need the same 1 or 2 values".into()));
    }
    let pad = |v: &[f64]| [v[0], v.get(1).copied().unwrap_or(v[0])];
    let spec = GridSpec {
        features,
        bias: model.bias != BiasMode::None,
        bounds: GridBounds {
            lo: pad(&args.lo),
            hi: pad(&args.hi),
        },
        resolution: args.resolution,
    };
    let path = out.join(format!("{}.csv", args.name));
    export_decision_grid(&model.weights, model.task, &spec, BufWriter::new(File::create(&path)?))?;
    report(&[path]);
    Ok(())
}

fn ingest(args: &IngestArgs, out: &Path) -> Result<()> {
    let options = IngestOptions {
        label_col: args.label_col.clone(),
        train_frac: args.train_frac,
        standardize: !args.no_standardize,
        seed: args.seed,
        task: task(args.task),
    };
    let split = ingest_csv(&args.csv_path, &options)?;
    let train = out.join(format!("{}_train.csv", args.name));
    let test = out.join(format!("{}_test.csv", args.name));
    write_dataset_csv(&split.train, BufWriter::new(File::create(&train)?))?;
    write_dataset_csv(&split.test, BufWriter::new(File::create(&test)?))?;
    let json = out.join(format!("{}.json", args.name));
    write_json(
        &json,
        &serde_json::json!({
            "options": options,
            "train_rows": split.train.n(),
            "test_rows": split.test.n(),
            "features": split.train.d(),
            "dropped": split.dropped,
            "standardization": split.standardization,
        }),
    )?;
    println!(
        "train {} test {} features {} dropped {}",
        split.train.n(),
        split.test.n(),
        split.train.d(),
        split.dropped
    );
    report(&[train, test, json]);
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    std::fs::create_dir_all(&cli.out_dir)?;
    let out = cli.out_dir.as_path();
    match &cli.command {
        Command::Train(a) => train(a, out),
        Command::Attack(a) => attack(a, out),
        Command::Table(a) => table(a, out),
        Command::PsSweep(a) => ps_sweep(a, out),
        Command::EpsSweep(a) => eps_sweep(a, out),
        Command::Grid(a) => grid(a, out),
        Command::Ingest(a) => ingest(a, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
