//! `hulm` command-line tool: train, predict, evaluate, cross-validate,
//! self-verify, generate synthetic data, and export weight magnitudes.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use hulm::{
    cross_validate_with, evaluate, holdout_split, kfold, load_dataset, load_model, one_vs_rest_detect_with, run_verification, save_dataset,
    save_model, search_lambda_model, synth_hmm_task, synth_order_task, synth_shift_task, train_model, CvOptions, Dataset, Error,
    EvalReport, Fault, Hyperparams, LambdaSearch, ModelFile, ModelKind, OracleBudget, Preprocess, Standardizer, TrainedModel, VerifyConfig,
    Window,
};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(name = "hulm", version, about = "Hidden-unit logistic model for time-series classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write it together with a training report.
    Train(TrainArgs),
    /// Print the predicted class and posterior for every series.
    Predict(PredictArgs),
    /// Score a saved model on a labelled dataset.
    Eval(EvalArgs),
    /// K-fold cross-validation, or one-vs-rest detection with --detect.
    Cv(CvArgs),
    /// Check inference and gradients against brute-force oracles.
    Verify(VerifyArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Write |W| of the hidden unit most associated with a label.
    ExportWeights(ExportArgs),
}

#[derive(Args, Clone)]
struct ModelOpts {
    #[arg(long, default_value = "hulm")]
    model: ModelKind,
    /// Number of hidden units (hulm only).
    #[arg(long, default_value_t = 100)]
    hidden: usize,
    /// L2 penalty on A, W and V.
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Multiplicative learning-rate decay per epoch.
    #[arg(long, default_value_t = 0.98)]
    lr_decay: f64,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 1)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// none, stack:W or slide:W
    #[arg(long, default_value = "none")]
    window: Window,
    /// Z-score features with statistics from the training data.
    #[arg(long)]
    standardize: bool,
}

impl ModelOpts {
    fn hyper(&self) -> Hyperparams {
        Hyperparams {
            hidden_units: self.hidden,
            l2_lambda: self.lambda,
            learning_rate: self.lr,
            lr_decay: self.lr_decay,
            epochs: self.epochs,
            batch_size: self.batch,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Where to write the trained model.
    #[arg(long)]
    model_path: PathBuf,
    /// Training report destination (JSON); standard output if omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    opts: ModelOpts,
    /// Comma-separated lambda candidates, tuned on a held-out split.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    /// Fraction of the training data held out while tuning lambda.
    #[arg(long, default_value_t = 0.25)]
    holdout: f64,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model_path: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model_path: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Plain-text table instead of JSON.
    #[arg(long)]
    table: bool,
}

#[derive(Args)]
struct CvArgs {
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    opts: ModelOpts,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    /// Keep all series of a group in the same fold.
    #[arg(long)]
    grouped: bool,
    /// Comma-separated target classes for one-vs-rest detection.
    #[arg(long, value_delimiter = ',')]
    detect: Option<Vec<usize>>,
    /// Folds trained concurrently.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    table: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = 50)]
    gradient_instances: usize,
    #[arg(long, default_value_t = 1000)]
    normalization_instances: usize,
    #[arg(long, default_value_t = 3)]
    max_hidden: usize,
    #[arg(long, default_value_t = 4)]
    max_len: usize,
    #[arg(long, default_value_t = 2)]
    max_dim: usize,
    #[arg(long, default_value_t = 3)]
    max_classes: usize,
    /// Cap on the number of enumerated hidden configurations.
    #[arg(long, default_value_t = 1 << 20)]
    max_states: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, hide = true)]
    inject_fault: Option<FaultArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FaultArg {
    FlipTransitionGradient,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthTask {
    /// Two classes that differ only in the order of their halves.
    Order,
    /// Two Markov chains that differ in persistence.
    Hmm,
    /// Two classes with shifted frame means.
    Shift,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(value_enum)]
    task: SynthTask,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 200)]
    per_class: usize,
    #[arg(long, default_value_t = 20)]
    length: usize,
    #[arg(long, default_value_t = 0.3)]
    noise: f64,
    /// Mean offset between classes (shift task).
    #[arg(long, default_value_t = 1.0)]
    separation: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    model_path: PathBuf,
    #[arg(long)]
    label: usize,
    #[arg(long)]
    output: Option<PathBuf>,
}

/// A failed command: exit status plus the diagnostic to print.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match err.root() {
            Error::NumericRange(_) | Error::Diverged { .. } => EXIT_NUMERIC,
            Error::Budget { .. } => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Failure::new(code, err.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(err: io::Error) -> Self {
        Failure::new(EXIT_DATA, err.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(err: serde_json::Error) -> Self {
        Failure::new(EXIT_DATA, err.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(if err.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Cv(a) => cmd_cv(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Synth(a) => cmd_synth(a),
        Command::ExportWeights(a) => cmd_export_weights(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn require_file(path: &Path) -> CmdResult {
    if !path.is_file() {
        return Err(Failure::new(EXIT_DATA, format!("{}: no such file", path.display())));
    }
    Ok(())
}

fn require_parent_dir(path: &Path) -> CmdResult {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(Failure::new(EXIT_DATA, format!("{}: output directory does not exist", dir.display())))
        }
        _ => Ok(()),
    }
}

fn load(path: &Path) -> Result<Dataset, Failure> {
    require_file(path)?;
    Ok(load_dataset(path)?)
}

/// Writes `text` to `path`, or to standard output when `path` is `None`.
fn emit(path: Option<&Path>, text: &str) -> CmdResult {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", p.display()))),
        None => {
            io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn to_json(value: &impl Serialize) -> Result<String, Failure> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Windows `data` and, if asked, fits a standardizer on the result.
fn fit_preprocess(data: &Dataset, window: Window, standardize: bool) -> Result<(Dataset, Preprocess), Failure> {
    let windowed = window.apply_dataset(data)?;
    let standardizer = if standardize { Some(Standardizer::fit(&windowed)?) } else { None };
    let processed = match &standardizer {
        Some(s) => s.apply(&windowed)?,
        None => windowed,
    };
    Ok((processed, Preprocess { window, standardizer }))
}

#[derive(Serialize)]
struct TrainSummary {
    model: ModelKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    hidden_units: Option<usize>,
    lambda: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_search: Option<LambdaSearch>,
    window: Window,
    standardize: bool,
    series: usize,
    epochs: usize,
    /// Negative regularized conditional log-likelihood after training.
    final_loss: f64,
    final_train_error: f64,
    /// Regularized conditional log-likelihood after each epoch.
    objectives: Vec<f64>,
    train_errors: Vec<f64>,
}

fn cmd_train(a: TrainArgs) -> CmdResult {
    let raw = load(&a.data)?;
    require_parent_dir(&a.model_path)?;
    if let Some(r) = &a.report {
        require_parent_dir(r)?;
    }
    let (data, preprocess) = fit_preprocess(&raw, a.opts.window, a.opts.standardize)?;
    let mut hyper = a.opts.hyper();
    hyper.validate()?;

    let lambda_search = match &a.grid {
        Some(grid) => {
            let (fit, val) = holdout_split(&data, a.holdout, a.opts.seed)?;
            let search = search_lambda_model(a.opts.model, &fit, &val, &hyper, grid)?;
            log::info!("selected lambda {}", search.best);
            hyper.l2_lambda = search.best;
            Some(search)
        }
        None => None,
    };

    let report = train_model(a.opts.model, &data, &hyper, None)?;
    let summary = TrainSummary {
        model: a.opts.model,
        hidden_units: (a.opts.model == ModelKind::Hulm).then_some(hyper.hidden_units),
        lambda: hyper.l2_lambda,
        lambda_search,
        window: a.opts.window,
        standardize: a.opts.standardize,
        series: data.len(),
        epochs: hyper.epochs,
        final_loss: -report.final_objective,
        final_train_error: report.final_train_error,
        objectives: report.objectives,
        train_errors: report.train_errors,
    };
    save_model(&a.model_path, &ModelFile { model: report.params, preprocess })?;
    emit(a.report.as_deref(), &to_json(&summary)?)
}

/// Raw feature dimension the model expects before windowing.
fn expected_input_dim(file: &ModelFile) -> usize {
    match file.preprocess.window {
        Window::None => file.model.dim(),
        Window::Stack(w) | Window::Slide(w) => file.model.dim() / w.max(1),
    }
}

/// Loads a model and a dataset and applies the model's preprocessing.
fn load_for_model(model_path: &Path, data_path: &Path) -> Result<(ModelFile, Dataset), Failure> {
    require_file(model_path)?;
    let file = load_model(model_path)?;
    let raw = load(data_path)?;
    let expected = expected_input_dim(&file);
    if raw.dim() != expected {
        return Err(Failure::new(
            EXIT_DATA,
            format!("dimension mismatch: model expects D = {expected}, {} has D = {}", data_path.display(), raw.dim()),
        ));
    }
    let data = file.preprocess.apply(&raw)?;
    Ok((file, data))
}

fn cmd_predict(a: PredictArgs) -> CmdResult {
    if let Some(o) = &a.output {
        require_parent_dir(o)?;
    }
    let (file, data) = load_for_model(&a.model_path, &a.data)?;
    let mut out = String::new();
    for s in &data.series {
        let p = file.model.predict_distribution(s)?;
        let label = file.model.predict_label(s)?;
        out.push_str(&label.to_string());
        for v in p {
            out.push('\t');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    emit(a.output.as_deref(), &out)
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    if let Some(o) = &a.output {
        require_parent_dir(o)?;
    }
    let (file, data) = load_for_model(&a.model_path, &a.data)?;
    if data.num_classes() > file.model.classes() {
        return Err(Failure::new(
            EXIT_DATA,
            format!("model has K = {} classes but the dataset has K = {}", file.model.classes(), data.num_classes()),
        ));
    }
    let report = evaluate(&file.model, &data)?;
    let text = if a.table { report.render_table() } else { to_json(&report)? };
    emit(a.output.as_deref(), &text)
}

fn cmd_cv(a: CvArgs) -> CmdResult {
    let raw = load(&a.data)?;
    if let Some(o) = &a.output {
        require_parent_dir(o)?;
    }
    if a.grouped && raw.series.iter().any(|s| s.group.is_none()) {
        return Err(Failure::new(EXIT_DATA, "--grouped needs a group id on every series"));
    }
    let data = a.opts.window.apply_dataset(&raw)?;
    let hyper = a.opts.hyper();
    hyper.validate()?;
    let plan = kfold(&data, a.folds, a.grouped, a.opts.seed)?;
    let opts = CvOptions { standardize: a.opts.standardize, threads: a.threads };

    let reports: Vec<EvalReport> = match &a.detect {
        None => vec![cross_validate_with(&data, &plan, &hyper, a.opts.model, opts)?],
        Some(targets) => {
            if a.opts.model != ModelKind::Hulm {
                return Err(Failure::new(EXIT_USAGE, "--detect trains hidden-unit models only; drop --model naive"));
            }
            let mut out = Vec::with_capacity(targets.len());
            for &t in targets {
                out.push(one_vs_rest_detect_with(&data, t, &plan, &hyper, opts)?);
            }
            out
        }
    };

    let text = if a.table {
        reports.iter().map(EvalReport::render_table).collect::<Vec<_>>().join("\n")
    } else if a.detect.is_some() {
        to_json(&reports)?
    } else {
        to_json(&reports[0])?
    };
    emit(a.output.as_deref(), &text)
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    let budget = OracleBudget { max_states: a.max_states };
    let cfg = VerifyConfig {
        instances: a.instances,
        gradient_instances: a.gradient_instances,
        normalization_instances: a.normalization_instances,
        max_hidden: a.max_hidden,
        max_len: a.max_len,
        max_dim: a.max_dim,
        max_classes: a.max_classes,
        budget,
        seed: a.seed,
        fault: a.inject_fault.map(|f| match f {
            FaultArg::FlipTransitionGradient => Fault::FlipTransitionGradient,
        }),
        ..VerifyConfig::default()
    };
    let report = run_verification(&cfg)?;
    let mut out = String::new();
    for c in &report.checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        out.push_str(&format!(
            "{status}  {:<44} worst {:.3e}  tolerance {:.0e}  ({} instances)\n",
            c.name, c.worst, c.tolerance, c.instances
        ));
    }
    emit(None, &out)?;
    if report.all_passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(Failure::new(EXIT_VERIFY, format!("failed checks: {}", failed.join(", "))))
    }
}

fn cmd_synth(a: SynthArgs) -> CmdResult {
    require_parent_dir(&a.output)?;
    let data = match a.task {
        SynthTask::Order => synth_order_task(a.per_class, a.length, a.noise, a.seed)?,
        SynthTask::Hmm => synth_hmm_task(a.per_class, a.length, a.seed)?,
        SynthTask::Shift => synth_shift_task(a.per_class, a.length, a.separation, a.noise, a.seed)?,
    };
    save_dataset(&a.output, &data)?;
    Ok(())
}

fn cmd_export_weights(a: ExportArgs) -> CmdResult {
    if let Some(o) = &a.output {
        require_parent_dir(o)?;
    }
    require_file(&a.model_path)?;
    let file = load_model(&a.model_path)?;
    let TrainedModel::Hulm(theta) = &file.model else {
        return Err(Failure::new(EXIT_USAGE, "export-weights needs a hidden-unit model"));
    };
    if a.label >= theta.classes() {
        return Err(Failure::new(EXIT_USAGE, format!("label {} out of range for K = {}", a.label, theta.classes())));
    }
    let mut best = 0;
    for h in 1..theta.hidden() {
        if theta.v.get(h, a.label) > theta.v.get(best, a.label) {
            best = h;
        }
    }
    log::info!("hidden unit {best} has the largest V for label {}", a.label);
    let out: String = theta.w.row(best).iter().map(|w| format!("{}\n", w.abs())).collect();
    emit(a.output.as_deref(), &out)
}
