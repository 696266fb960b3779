//! Command-line front end.
//!
//! Exit codes: 0 success, 1 internal error (or failed checks), 2 configuration
//! error, 3 data error. Configuration precedence is flags, then the JSON file
//! given by `--config`, then built-in defaults.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::checks::{self, CheckOptions};
use crate::clustering::ClusterBackend;
use crate::dataset::{self, SyntheticSpec, DEFAULT_LABEL_COLUMN};
use crate::error::{Error, ErrorKind, Result};
use crate::evaluation::{self, ExperimentOptions};
use crate::objective::{self, FscpuObjective, ObjectiveReport};
use crate::optimizer::{self, CostConstraint, FeatureMask, ObjectiveMode, RunConfig, RunResult};
use crate::rng;

#[derive(Debug, Parser)]
#[command(
    name = "fscpu",
    version,
    about = "Cluster-assumption feature selection for PU data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Select features from a PU dataset.
    Select(SelectArgs),
    /// Generate a synthetic benchmark dataset plus ground-truth sidecar.
    Synth(SynthArgs),
    /// Feature-selection recall of a selected-features file against a sidecar.
    Eval(EvalArgs),
    /// Run the built-in property suite.
    Check(CheckArgs),
    /// Run synthetic benchmark conditions and write a results table.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args, Clone, Default)]
pub struct SharedArgs {
    /// Seed for every random choice in the job.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output location (directory for select/experiment, CSV path for synth).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Input CSV.
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub label_col: Option<String>,
    /// Total cost allowed (a feature count with unit costs).
    #[arg(long)]
    pub budget: Option<f64>,
    /// `unit` or a file of per-feature costs.
    #[arg(long)]
    pub costs: Option<String>,
    #[arg(long)]
    pub objective: Option<ObjectiveMode>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub backend: Option<ClusterBackend>,
    #[arg(long)]
    pub trace_every: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub var_floor: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Skip min-max scaling of the input.
    #[arg(long)]
    pub no_normalize: bool,
    #[command(flatten)]
    pub shared: SharedArgs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, conflicts_with = "outlier")]
    pub cluster_assumption: bool,
    #[arg(long)]
    pub outlier: bool,
    #[arg(long)]
    pub labeled_rate: Option<f64>,
    #[arg(long)]
    pub neg: Option<usize>,
    #[arg(long)]
    pub pos: Option<usize>,
    #[command(flatten)]
    pub shared: SharedArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// File with one selected feature name per line.
    #[arg(long)]
    pub selected: PathBuf,
    /// Ground-truth sidecar (`*.truth.json`).
    #[arg(long)]
    pub truth: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Random instances for the oracle sweep.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Swap in a known-wrong subset solver (negative control).
    #[arg(long, hide = true)]
    pub inject_fault: bool,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// 1-based condition columns to run (default: all ten).
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<usize>,
    #[arg(long, default_value_t = 5)]
    pub seeds: usize,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub objective: Option<ObjectiveMode>,
    /// Stratified row subsample per dataset.
    #[arg(long)]
    pub subsample: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Fully resolved `select` job; echoed into `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectConfig {
    pub data: Option<PathBuf>,
    pub label_col: String,
    pub budget: Option<f64>,
    pub costs: String,
    pub normalize: bool,
    pub run: RunConfig,
}

impl Default for SelectConfig {
    fn default() -> Self {
        Self {
            data: None,
            label_col: DEFAULT_LABEL_COLUMN.to_string(),
            budget: None,
            costs: "unit".to_string(),
            normalize: true,
            run: RunConfig::default(),
        }
    }
}

#[derive(Debug, Serialize)]
struct SelectOutput<'a> {
    #[serde(flatten)]
    result: &'a RunResult,
    selected_feature_names: Vec<String>,
    selection_report: &'a ObjectiveReport,
    job: &'a SelectConfig,
}

fn read_config_value(path: &Path) -> Result<serde_json::Value> {
    if !path.exists() {
        return Err(Error::Config(format!(
            "config file not found: {}",
            path.display()
        )));
    }
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Accepts a bare config object or a previous `result.json` (via its `job` key).
fn load_select_config(path: &Path) -> Result<SelectConfig> {
    let mut value = read_config_value(path)?;
    if let Some(job) = value.get_mut("job") {
        value = job.take();
    }
    serde_json::from_value(value).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

pub fn resolve_select(args: &SelectArgs) -> Result<SelectConfig> {
    let mut cfg = match &args.shared.config {
        Some(path) => load_select_config(path)?,
        None => SelectConfig::default(),
    };
    if let Some(v) = &args.data {
        cfg.data = Some(v.clone());
    }
    if let Some(v) = &args.label_col {
        cfg.label_col = v.clone();
    }
    if let Some(v) = args.budget {
        cfg.budget = Some(v);
    }
    if let Some(v) = &args.costs {
        cfg.costs = v.clone();
    }
    if args.no_normalize {
        cfg.normalize = false;
    }
    let run = &mut cfg.run;
    if let Some(v) = args.shared.seed {
        run.seed = v;
    }
    if let Some(v) = args.objective {
        run.objective = v;
    }
    if let Some(v) = args.iters {
        run.iterations = v;
    }
    if let Some(v) = args.clusters {
        run.cluster.n_components = v;
    }
    if let Some(v) = args.backend {
        run.cluster.backend = v;
    }
    if let Some(v) = args.trace_every {
        run.trace_every = v;
    }
    if let Some(v) = args.max_iter {
        run.cluster.max_iter = v;
    }
    if let Some(v) = args.tol {
        run.cluster.tol = v;
    }
    if let Some(v) = args.var_floor {
        run.cluster.var_floor = v;
    }
    if args.eta.is_some() {
        run.eta = args.eta;
    }
    if args.epsilon.is_some() {
        run.epsilon = args.epsilon;
    }
    if cfg.data.is_none() {
        return Err(Error::Config("no input CSV given".to_string()));
    }
    match cfg.budget {
        None => return Err(Error::Config("--budget is required".to_string())),
        Some(b) if b.is_nan() || b < 1.0 => {
            return Err(Error::Config(format!("budget must be at least 1, got {b}")))
        }
        _ => {}
    }
    cfg.run.validate()?;
    Ok(cfg)
}

/// `unit`, or a file of numbers separated by commas, whitespace or newlines
/// (a JSON array also parses).
pub fn parse_costs(spec: &str, d: usize) -> Result<Vec<f64>> {
    if spec == "unit" {
        return Ok(vec![1.0; d]);
    }
    let path = Path::new(spec);
    if !path.exists() {
        return Err(Error::Config(format!("costs file not found: {spec}")));
    }
    let text = fs::read_to_string(path)?;
    let costs = text
        .split(|c: char| c == ',' || c.is_whitespace() || c == '[' || c == ']')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::InvalidCosts(format!("'{t}' is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    if costs.len() != d {
        return Err(Error::InvalidCosts(format!(
            "{} costs for {d} features",
            costs.len()
        )));
    }
    Ok(costs)
}

fn cmd_select(args: &SelectArgs) -> Result<()> {
    let cfg = resolve_select(args)?;
    let out_dir = args
        .shared
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("fscpu-out"));
    let path = cfg.data.as_ref().expect("checked in resolve_select");
    let mut data = dataset::load_csv(path, &cfg.label_col)?;
    if cfg.normalize {
        data = dataset::normalize(&data);
    }
    let costs = parse_costs(&cfg.costs, data.n_features())?;
    let constraint = CostConstraint::new(costs, cfg.budget.expect("checked"))?;
    let result = optimizer::run(&data, &cfg.run, &constraint)?;

    let with_mi = cfg.run.objective == ObjectiveMode::FscpuMi;
    let objective = FscpuObjective::new(&data, cfg.run.cluster.clone(), with_mi);
    let selection = FeatureMask::from_indices(data.n_features(), &result.selected_features);
    let mut report = objective.report(&selection, rng::derive(cfg.run.seed, &[0x5E1]))?;
    if with_mi {
        report.combined = report.mi.map(|mi| report.f + mi);
    }

    let names: Vec<String> = result
        .selected_features
        .iter()
        .map(|&i| data.feature_name(i))
        .collect();
    fs::create_dir_all(&out_dir)?;
    let output = SelectOutput {
        result: &result,
        selected_feature_names: names.clone(),
        selection_report: &report,
        job: &cfg,
    };
    fs::write(
        out_dir.join("result.json"),
        serde_json::to_string_pretty(&output)?,
    )?;
    fs::write(out_dir.join("theta_trace.csv"), result.trace_csv())?;
    let mut listing = names.join("\n");
    listing.push('\n');
    fs::write(out_dir.join("selected_features.txt"), listing)?;

    println!(
        "selected {} features (f = {:.4}, converged {:.1}%) -> {}",
        result.selected_features.len(),
        report.f,
        100.0 * result.convergence_fraction,
        out_dir.display()
    );
    Ok(())
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut spec = match &args.shared.config {
        Some(path) => serde_json::from_value(read_config_value(path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?,
        None => SyntheticSpec::clustered(0.1, 8, 1, 0),
    };
    if args.outlier {
        spec.cluster_assumption = false;
    }
    if args.cluster_assumption {
        spec.cluster_assumption = true;
    }
    if args.shared.config.is_none() && !args.outlier && !args.cluster_assumption {
        return Err(Error::Config(
            "choose --cluster-assumption or --outlier".to_string(),
        ));
    }
    if let Some(v) = args.labeled_rate {
        spec.labeled_rate = v;
    }
    if let Some(v) = args.neg {
        spec.n_negative_clusters = v;
    }
    if let Some(v) = args.pos {
        spec.n_positive_clusters = v;
    }
    if let Some(v) = args.shared.seed {
        spec.seed = v;
    }
    if !spec.cluster_assumption {
        spec.n_negative_clusters = 0;
        spec.n_positive_clusters = 0;
    }
    let data = dataset::generate(&spec)?;
    let out = args
        .shared
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("synthetic.csv"));
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    dataset::write_csv(&data, &out)?;
    println!(
        "wrote {} rows x {} features ({} labeled) to {}",
        data.n_rows(),
        data.n_features(),
        data.n_labeled(),
        out.display()
    );
    Ok(())
}

/// FSR from feature names.
pub fn fsr_from_names(selected: &[String], relevant: &[String]) -> Result<f64> {
    if relevant.is_empty() {
        return Err(Error::NoGroundTruth);
    }
    let mut names: Vec<&String> = relevant.iter().collect();
    names.sort();
    names.dedup();
    let truth: Vec<bool> = vec![true; names.len()];
    let picked: Vec<usize> = selected
        .iter()
        .filter_map(|s| names.binary_search(&s).ok())
        .collect();
    evaluation::fsr(&picked, &truth)
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    if !args.selected.exists() {
        return Err(Error::MissingFile(args.selected.clone()));
    }
    let selected: Vec<String> = fs::read_to_string(&args.selected)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_string)
        .collect();
    let truth = dataset::read_ground_truth(&args.truth)?;
    let score = fsr_from_names(&selected, &truth.relevant_columns)?;
    println!("{score}");
    Ok(())
}

fn cmd_check(args: &CheckArgs) -> bool {
    let options = CheckOptions {
        trials: args.trials,
        seed: args.seed,
        ..CheckOptions::default()
    };
    let solver: checks::SubsetSolver = if args.inject_fault {
        checks::top_cluster_only
    } else {
        objective::objective_value
    };
    let outcomes = checks::run_checks(&options, solver);
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        println!(
            "{status} {:<32} cases={:<6} failures={}",
            o.name, o.cases, o.failures
        );
        if !o.passed && !o.detail.is_empty() {
            println!("     first failure: {}", o.detail);
        }
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("{passed}/{} checks passed", outcomes.len());
    passed == outcomes.len()
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<()> {
    let all = evaluation::table_conditions();
    let picks: Vec<usize> = if args.only.is_empty() {
        (1..=all.len()).collect()
    } else {
        args.only.clone()
    };
    let mut config = RunConfig::default();
    if let Some(v) = args.iters {
        config.iterations = v;
    }
    if let Some(v) = args.clusters {
        config.cluster.n_components = v;
    }
    if let Some(v) = args.max_iter {
        config.cluster.max_iter = v;
    }
    if let Some(v) = args.objective {
        config.objective = v;
    }
    config.validate()?;
    let options = ExperimentOptions {
        n_seeds: args.seeds,
        subsample_rows: args.subsample,
        jobs: args.jobs,
    };
    let mut results = Vec::new();
    for p in picks {
        let spec = all
            .get(p.wrapping_sub(1))
            .ok_or_else(|| Error::Config(format!("condition {p} outside 1..={}", all.len())))?;
        let r = evaluation::run_condition_with(spec, &config, &options)?;
        println!("{:<18} FSR {}  per-seed {:?}", r.label, r.cell(), r.fsr);
        results.push(r);
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("fscpu-experiment"));
    fs::create_dir_all(&out)?;
    evaluation::write_table(&results, &out.join("table.csv"), &out.join("table.json"))?;
    Ok(())
}

fn exit_for(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    match err.kind() {
        ErrorKind::Config => ExitCode::from(2),
        ErrorKind::Data => ExitCode::from(3),
        ErrorKind::Internal => ExitCode::from(1),
    }
}

pub fn run_from_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(2));
        }
    };
    let outcome = match &cli.command {
        Command::Select(a) => cmd_select(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Check(a) => {
            return if cmd_check(a) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Command::Experiment(a) => cmd_experiment(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => exit_for(&e),
    }
}
