//! The `gridscreen` command line.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage, configuration or
//! input-file errors.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::dcopf::{check_limits, solve_opf, MonitoredSet, REPORT_TOL_MW};
use crate::error::Error;
use crate::gnn::{load_model, save_model, ModelConfig, SavedModel};
use crate::netcase::{parse_case, Network};
use crate::ropf::{
    evaluate, table_csv, threshold_sweep, train_for_threshold, EvalOptions, EvalReport, FixedSet, ModelKind,
    OracleLabels, Predictor, SweepPredictor,
};
use crate::samplegen::{generate_dataset, split_dataset, Dataset, GenerateOptions, Splits};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Runtime(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Input errors (bad files, bad values) are usage errors; everything else is runtime.
fn input(path: &Path, e: Error) -> CliError {
    match e {
        Error::Io(io) => usage(format!("cannot read {}: {io}", path.display())),
        other => usage(format!("{}: {other}", path.display())),
    }
}

fn config_error(e: Error) -> CliError {
    match e {
        Error::InvalidArgument(_) => usage(e.to_string()),
        other => CliError::Runtime(other),
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "gridscreen",
    version,
    about = "DC-OPF constraint screening with graph neural networks"
)]
pub struct Cli {
    /// JSON file with default values for any flag; explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for sample generation and prediction.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a labeled dataset of perturbed-load OPF solutions.
    GenData(GenDataArgs),
    /// Train a congestion classifier at one threshold.
    Train(TrainArgs),
    /// Evaluate a predictor on the test split with reduced OPF runs.
    Eval(EvalArgs),
    /// Train and evaluate at several thresholds.
    Sweep(SweepArgs),
    /// Solve one OPF, optionally with a reduced set of monitored branches.
    Solve(SolveArgs),
}

#[derive(Debug, Args)]
pub struct GenDataArgs {
    #[arg(long)]
    pub case: Option<PathBuf>,
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long)]
    pub magnitude: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Store zero solve times so repeated runs are byte-identical.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Gnn,
    Mlp,
}

impl From<Baseline> for ModelKind {
    fn from(b: Baseline) -> Self {
        match b {
            Baseline::Gnn => ModelKind::Gnn,
            Baseline::Mlp => ModelKind::Mlp,
        }
    }
}

#[derive(Debug, Args, Default)]
pub struct SplitArgs {
    /// Train/validation/test fractions.
    #[arg(long, value_delimiter = ',')]
    pub split: Option<Vec<f64>>,
    /// Seed for the split shuffle; defaults to the dataset seed.
    #[arg(long)]
    pub split_seed: Option<u64>,
}

#[derive(Debug, Args, Default)]
pub struct TrainingArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub node_channels: Option<usize>,
    #[arg(long)]
    pub edge_channels: Option<usize>,
    /// Seed for weight initialization and batch order.
    #[arg(long)]
    pub model_seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-epoch history CSV; defaults to `<out>.history.csv`.
    #[arg(long)]
    pub history: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalPredictor {
    /// The model given by `--model`.
    Model,
    /// True labels at the threshold.
    Oracle,
    /// Every branch monitored.
    All,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Defaults to the threshold stored in the model.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub predictor: Option<EvalPredictor>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Gnn,
    Mlp,
    Oracle,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Comma-separated thresholds, as percentages (`70,75`) or fractions (`0.7,0.75`).
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    pub predictor: Option<SweepKind>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[command(flatten)]
    pub split: SplitArgs,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub case: Option<PathBuf>,
    /// File of `bus_id load_mw` lines overriding the case loads.
    #[arg(long)]
    pub load: Option<PathBuf>,
    /// `all`, `none`, or a file listing branch numbers (1-based) or `from-to` labels.
    #[arg(long, default_value = "all")]
    pub monitor: String,
    /// Also write the dispatch as JSON.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

/// Values that may come from `--config`. Flags override every field.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub case: Option<PathBuf>,
    pub data: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub history: Option<PathBuf>,
    pub samples: Option<usize>,
    pub magnitude: Option<f64>,
    pub seed: Option<u64>,
    pub threshold: Option<f64>,
    pub thresholds: Option<Vec<f64>>,
    pub split: Option<Vec<f64>>,
    pub split_seed: Option<u64>,
    pub baseline: Option<Baseline>,
    pub predictor: Option<String>,
    pub threads: Option<usize>,
    pub no_timing: Option<bool>,
    pub model_config: Option<ModelConfig>,
}

impl RunConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }
}

fn required<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| usage(format!("missing required --{flag}")))
}

fn threshold_value(tau: f64) -> CliResult<f64> {
    if tau > 0.0 && tau <= 1.0 {
        Ok(tau)
    } else {
        Err(usage(format!("--threshold must lie in (0, 1], got {tau}")))
    }
}

/// Parses arguments and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> CliResult<()> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let threads = cli.threads.or(file.threads);
    if threads == Some(0) {
        return Err(usage("--threads must be at least 1"));
    }
    match cli.command {
        Command::GenData(a) => cmd_gen_data(a, &file, threads),
        Command::Train(a) => cmd_train(a, &file),
        Command::Eval(a) => cmd_eval(a, &file, threads),
        Command::Sweep(a) => cmd_sweep(a, &file, threads),
        Command::Solve(a) => cmd_solve(a, &file),
    }
}

fn read_case(path: &Path) -> CliResult<Network> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    parse_case(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn read_dataset(path: &Path) -> CliResult<(Dataset, Network)> {
    let data = Dataset::load(path).map_err(|e| input(path, e))?;
    let net = data.network().map_err(|e| input(path, e))?;
    Ok((data, net))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::Runtime(Error::Io(e)))
}

fn cmd_gen_data(a: GenDataArgs, file: &RunConfig, threads: Option<usize>) -> CliResult<()> {
    let case = required(a.case.or(file.case.clone()), "case")?;
    let out = required(a.out.or(file.out.clone()), "out")?;
    let samples = a.samples.or(file.samples).unwrap_or(1000);
    let magnitude = a.magnitude.or(file.magnitude).unwrap_or(0.1);
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let no_timing = a.no_timing || file.no_timing.unwrap_or(false);
    if samples == 0 {
        return Err(usage("--samples must be at least 1"));
    }
    if !(0.0..1.0).contains(&magnitude) {
        return Err(usage(format!("--magnitude must lie in [0, 1), got {magnitude}")));
    }
    let net = read_case(&case)?;
    let start = Instant::now();
    let options = GenerateOptions {
        threads,
        record_timing: !no_timing,
    };
    let data = generate_dataset(&net, samples, magnitude, seed, options).map_err(config_error)?;
    let seconds = start.elapsed().as_secs_f64();
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
    }
    data.save(&out)?;
    println!(
        "wrote {} samples to {} ({} infeasible redraws, {:.3} s)",
        data.samples.len(),
        out.display(),
        data.header.infeasible_redraws,
        seconds
    );
    Ok(())
}

fn splits_for(data: &Dataset, split: &SplitArgs, file: &RunConfig) -> CliResult<Splits> {
    let ratios = split
        .split
        .clone()
        .or(file.split.clone())
        .unwrap_or_else(|| vec![0.8, 0.1, 0.1]);
    if ratios.len() != 3 {
        return Err(usage("--split takes three comma-separated fractions"));
    }
    let seed = split.split_seed.or(file.split_seed).unwrap_or(data.header.seed);
    split_dataset(&data.samples, (ratios[0], ratios[1], ratios[2]), seed).map_err(config_error)
}

fn model_config(t: &TrainingArgs, file: &RunConfig) -> CliResult<ModelConfig> {
    let mut c = file.model_config.clone().unwrap_or_default();
    if let Some(v) = t.epochs {
        c.epochs = v;
    }
    if let Some(v) = t.learning_rate {
        c.learning_rate = v;
    }
    if let Some(v) = t.batch_size {
        c.batch_size = v;
    }
    if let Some(v) = t.layers {
        c.num_layers = v;
    }
    if let Some(v) = t.node_channels {
        c.node_channels = v;
    }
    if let Some(v) = t.edge_channels {
        c.edge_channels = v;
    }
    if let Some(v) = t.model_seed {
        c.seed = v;
    }
    c.validate().map_err(|e| usage(e.to_string()))?;
    Ok(c)
}

fn default_history(out: &Path) -> PathBuf {
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(".history.csv");
    out.with_file_name(name)
}

fn cmd_train(a: TrainArgs, file: &RunConfig) -> CliResult<()> {
    let data_path = required(a.data.or(file.data.clone()), "data")?;
    let out = required(a.out.or(file.out.clone()), "out")?;
    let tau = threshold_value(required(a.threshold.or(file.threshold), "threshold")?)?;
    let kind: ModelKind = a.baseline.or(file.baseline).unwrap_or(Baseline::Gnn).into();
    let config = model_config(&a.training, file)?;
    let history_path = a
        .history
        .or(file.history.clone())
        .unwrap_or_else(|| default_history(&out));
    let (data, net) = read_dataset(&data_path)?;
    let splits = splits_for(&data, &a.split, file)?;
    let (model, history) = train_for_threshold(&net, &splits, tau, kind, &config)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(Error::from)?;
    }
    save_model(&model, &out)?;
    write_file(&history_path, &history.to_csv())?;
    let last = history.len().checked_sub(1);
    println!(
        "trained {} model for {} epochs at threshold {tau}; final val accuracy {}; wrote {} and {}",
        model.kind(),
        history.len(),
        last.map_or("n/a".to_string(), |i| format!("{:.4}", history.val_acc[i])),
        out.display(),
        history_path.display()
    );
    Ok(())
}

fn write_report(dir: &Path, report: &EvalReport) -> CliResult<()> {
    write_file(&dir.join("report.json"), &report.to_json()?)?;
    write_file(&dir.join("table.csv"), &table_csv(std::slice::from_ref(report)))?;
    write_file(&dir.join("branches.csv"), &report.branch_csv())?;
    write_file(&dir.join("histogram.csv"), &report.histogram_csv())?;
    write_file(&dir.join("cost.csv"), &report.cost_csv())?;
    Ok(())
}

fn summary(r: &EvalReport) -> String {
    format!(
        "threshold {}: prediction error {:.4}%, samples over limit {:.2}%, lines monitored {:.2}%, time {:.2}% of full OPF",
        r.threshold, r.edge_prediction_error_pct, r.pct_samples_with_violation, r.pct_lines_monitored, r.time_pct
    )
}

fn cmd_eval(a: EvalArgs, file: &RunConfig, threads: Option<usize>) -> CliResult<()> {
    let data_path = required(a.data.or(file.data.clone()), "data")?;
    let out_dir = required(a.out_dir.or(file.out_dir.clone()), "out-dir")?;
    let which = match (a.predictor, &file.predictor) {
        (Some(p), _) => p,
        (None, Some(s)) => EvalPredictor::from_str(s, true).map_err(|_| usage(format!("unknown predictor `{s}`")))?,
        (None, None) => EvalPredictor::Model,
    };
    let model = match which {
        EvalPredictor::Model => {
            let path = required(a.model.or(file.model.clone()), "model")?;
            if !path.exists() {
                return Err(usage(format!("model file {} does not exist", path.display())));
            }
            Some(load_model(&path).map_err(|e| input(&path, e))?)
        }
        _ => None,
    };
    let tau = a
        .threshold
        .or(file.threshold)
        .or_else(|| model.as_ref().and_then(SavedModel::threshold));
    let tau = threshold_value(required(tau, "threshold")?)?;
    let (data, net) = read_dataset(&data_path)?;
    let splits = splits_for(&data, &a.split, file)?;

    let predictor: Box<dyn Predictor> = match (which, model) {
        (EvalPredictor::Model, Some(m)) => Box::new(m),
        (EvalPredictor::Oracle, _) => Box::new(OracleLabels { tau }),
        _ => Box::new(FixedSet::all(&net)),
    };
    if let Some(trained) = predictor.trained_threshold() {
        if trained != tau {
            eprintln!("warning: model was trained at threshold {trained}, evaluating at {tau}");
        }
    }
    let report = evaluate(&net, predictor.as_ref(), &splits.test, tau, EvalOptions { threads })?;
    write_report(&out_dir, &report)?;
    println!("{}", summary(&report));
    Ok(())
}

fn cmd_sweep(a: SweepArgs, file: &RunConfig, threads: Option<usize>) -> CliResult<()> {
    let data_path = required(a.data.or(file.data.clone()), "data")?;
    let out_dir = required(a.out_dir.or(file.out_dir.clone()), "out-dir")?;
    let thresholds = a
        .thresholds
        .or(file.thresholds.clone())
        .unwrap_or_else(|| vec![70.0, 75.0, 80.0, 85.0, 90.0, 95.0]);
    let taus = crate::ropf::canonical_thresholds(&thresholds).map_err(|e| usage(e.to_string()))?;
    let kind = match (a.predictor, &file.predictor) {
        (Some(p), _) => p,
        (None, Some(s)) => SweepKind::from_str(s, true).map_err(|_| usage(format!("unknown predictor `{s}`")))?,
        (None, None) => SweepKind::Gnn,
    };
    let predictor = match kind {
        SweepKind::Gnn => SweepPredictor::Model(ModelKind::Gnn),
        SweepKind::Mlp => SweepPredictor::Model(ModelKind::Mlp),
        SweepKind::Oracle => SweepPredictor::Oracle,
    };
    let config = model_config(&a.training, file)?;
    let (data, net) = read_dataset(&data_path)?;
    let splits = splits_for(&data, &a.split, file)?;
    let entries = threshold_sweep(&net, &splits, &taus, predictor, &config, EvalOptions { threads })?;
    let reports: Vec<EvalReport> = entries.iter().map(|e| e.report.clone()).collect();
    write_file(&out_dir.join("sweep.csv"), &table_csv(&reports))?;
    for e in &entries {
        let tag = format!("{}", e.report.threshold);
        write_file(&out_dir.join(format!("report_{tag}.json")), &e.report.to_json()?)?;
        if let Some(h) = &e.history {
            write_file(&out_dir.join(format!("history_{tag}.csv")), &h.to_csv())?;
        }
        println!("{}", summary(&e.report));
    }
    println!("wrote {}", out_dir.join("sweep.csv").display());
    Ok(())
}

fn read_loads(path: &Path, net: &Network) -> CliResult<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let mut load = net.base_load();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('%').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let bad = || usage(format!("{} line {}: expected `bus_id load_mw`", path.display(), i + 1));
        let mut it = line.split_whitespace();
        let id: u32 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let mw: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        if it.next().is_some() || !mw.is_finite() {
            return Err(bad());
        }
        let n = net
            .bus_index(id)
            .ok_or_else(|| usage(format!("{} line {}: unknown bus {id}", path.display(), i + 1)))?;
        load[n] = mw;
    }
    Ok(load)
}

fn read_monitor(arg: &str, net: &Network) -> CliResult<MonitoredSet> {
    let k = net.num_branches();
    match arg {
        "all" => return Ok(MonitoredSet::all(k)),
        "none" => return Ok(MonitoredSet::none()),
        _ => {}
    }
    let path = Path::new(arg);
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read monitor file {arg}: {e}")))?;
    let mut picked = Vec::new();
    for token in text
        .lines()
        .map(|l| l.split('%').next().unwrap_or(""))
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|t| !t.is_empty())
    {
        let idx = if let Ok(n) = token.parse::<usize>() {
            if n == 0 || n > k {
                return Err(usage(format!("branch number {n} out of range 1..={k}")));
            }
            n - 1
        } else {
            let matches: Vec<usize> = (0..k).filter(|&b| net.branch_label(b) == token).collect();
            match matches.as_slice() {
                [one] => *one,
                [] => return Err(usage(format!("no branch labelled `{token}`"))),
                _ => return Err(usage(format!("label `{token}` is ambiguous; use branch numbers"))),
            }
        };
        picked.push(idx);
    }
    MonitoredSet::new(picked, k).map_err(|e| usage(e.to_string()))
}

/// Human-readable dispatch table.
pub fn format_dispatch(net: &Network, sol: &crate::dcopf::DispatchSolution, monitored: &MonitoredSet) -> String {
    let mut out = String::new();
    let status = serde_json::to_value(sol.status)
        .ok()
        .and_then(|v| v.as_str().map(String::from));
    let _ = writeln!(out, "status: {}", status.unwrap_or_default());
    if !sol.is_optimal() {
        return out;
    }
    let _ = writeln!(out, "objective: {:.6}", sol.objective);
    let _ = writeln!(out, "generators:");
    let _ = writeln!(out, "  {:>4} {:>6} {:>14}", "gen", "bus", "p_mw");
    for (g, gen) in net.generators().iter().enumerate() {
        let _ = writeln!(out, "  {:>4} {:>6} {:>14.6}", g + 1, gen.bus, sol.p_g[g]);
    }
    let report = check_limits(net, &sol.flows, REPORT_TOL_MW);
    let _ = writeln!(out, "branches:");
    let _ = writeln!(
        out,
        "  {:>4} {:>8} {:>14} {:>10} {:>9} {:>9}  status",
        "k", "branch", "flow_mw", "limit_mw", "loading", "monitored"
    );
    for (k, br) in net.branches().iter().enumerate() {
        let _ = writeln!(
            out,
            "  {:>4} {:>8} {:>14.6} {:>10} {:>8.2}% {:>9}  {}",
            k + 1,
            net.branch_label(k),
            sol.flows[k],
            br.rate_a_mw,
            100.0 * sol.flows[k].abs() / br.rate_a_mw,
            if monitored.contains(k) { "yes" } else { "no" },
            if report.violated[k] {
                format!("VIOLATED by {:.6} MW", report.overload_mw[k])
            } else {
                "ok".to_string()
            }
        );
    }
    let n = report.violated_branches().count();
    let _ = writeln!(out, "violations: {n}");
    out
}

fn cmd_solve(a: SolveArgs, file: &RunConfig) -> CliResult<()> {
    let case = required(a.case.or(file.case.clone()), "case")?;
    let net = read_case(&case)?;
    let load = match &a.load {
        Some(p) => read_loads(p, &net)?,
        None => net.base_load(),
    };
    let monitored = read_monitor(&a.monitor, &net)?;
    let sol = solve_opf(&net, &load, &monitored)?;
    print!("{}", format_dispatch(&net, &sol, &monitored));
    if let Some(path) = &a.json {
        write_file(path, &serde_json::to_string_pretty(&sol).map_err(Error::from)?)?;
    }
    Ok(())
}
