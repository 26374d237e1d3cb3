//! Argument definitions and subcommand implementations for the binary.

use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use covadapt_core::{run_adapter, AdapterConfig, SearchSpace};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{
    parse_geometries, parse_methods, run_ablations, run_benchmark, AblationKind, AblationPlan, Experiment, Settings,
    DEFAULT_GEOMETRIES,
};
use crate::ingest::{forecast_instance, load_csv, RunConfig};
use crate::output::write_atomic;
use crate::remote::{OracleSelector, DEFAULT_TIMEOUT};
use crate::synthetic::{gen_synthetic, SyntheticSpec};

#[derive(Debug, Parser)]
#[command(name = "covadapt", version, about = "Covariate adaptation for black-box univariate forecasters")]
pub struct Cli {
    /// Increase log verbosity on stderr (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Forecast the steps after the last known target value.
    Forecast(ForecastArgs),
    /// Evaluate methods over non-overlapping test windows.
    Evaluate(EvaluateArgs),
    /// Run an ablation study.
    Ablate(AblateArgs),
    /// Write a seeded synthetic dataset.
    GenSynthetic(SyntheticArgs),
}

/// Dataset, geometry and oracle options. Flags override the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV data file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Target column name.
    #[arg(long)]
    pub target: Option<String>,
    /// Comma-separated covariate column names.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,
    /// Frequency token, informational only.
    #[arg(long)]
    pub frequency: Option<String>,
    /// History length H.
    #[arg(long)]
    pub history: Option<usize>,
    /// Forecast horizon F.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Minimum oracle context h.
    #[arg(long)]
    pub min_context: Option<usize>,
    /// Steps per season s.
    #[arg(long)]
    pub seasonality: Option<usize>,
    /// Number of lag features L.
    #[arg(long)]
    pub lags: Option<usize>,
    /// Size of the sinusoidal position encoding p (even).
    #[arg(long)]
    pub pos_dim: Option<usize>,
    /// Window selection strategy: zscore, latest or random.
    #[arg(long)]
    pub strategy: Option<String>,
    /// Number of Stage-I windows K.
    #[arg(long)]
    pub k: Option<usize>,
    /// GP search grid: full or compact.
    #[arg(long)]
    pub search: Option<String>,
    /// Seed for randomized choices.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Seconds to wait for each reply of an external oracle.
    #[arg(long)]
    pub oracle_timeout: Option<u64>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Oracle: seasonal-naive, ar:<order>, exec:<command> or http:<url>.
    #[arg(long)]
    pub oracle: Option<String>,
    /// Forecast CSV; a JSON run summary is written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Oracle: seasonal-naive, ar:<order>, exec:<command> or http:<url>.
    #[arg(long)]
    pub oracle: Option<String>,
    /// Comma-separated methods: adapter, oracle, direct-<k>, seasonal-naive, ar:<order>.
    #[arg(long, default_value = "adapter,oracle")]
    pub methods: String,
    /// Number of test windows.
    #[arg(long)]
    pub num_test_windows: Option<usize>,
    /// Concurrent window evaluations.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Directory for evaluation.csv and evaluation.json.
    #[arg(long, visible_alias = "out", default_value = "reports")]
    pub report_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// pseudo, windows or geometry.
    #[arg(long)]
    pub kind: String,
    /// Oracle selector; repeat to compare several oracles.
    #[arg(long)]
    pub oracle: Vec<String>,
    /// Geometry sweep as HxF pairs, e.g. 672x24,1344x24.
    #[arg(long)]
    pub geometries: Option<String>,
    /// Number of test windows.
    #[arg(long)]
    pub num_test_windows: Option<usize>,
    /// Concurrent window evaluations.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Directory for ablation_<kind>.csv and .json.
    #[arg(long, visible_alias = "out", default_value = "reports")]
    pub report_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct SyntheticArgs {
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV with columns t,y,x,x_oracle.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of rows.
    #[arg(long, default_value_t = 720)]
    pub length: usize,
    /// Period of the seasonal component.
    #[arg(long, default_value_t = 24)]
    pub seasonality: usize,
    /// Weight c of the covariate in the target.
    #[arg(long, default_value_t = 1.0)]
    pub coupling: f64,
    /// Standard deviation of the observation noise.
    #[arg(long, default_value_t = 0.1)]
    pub noise_std: f64,
    /// Amplitude of the seasonal component and scale of the covariate.
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    /// Steps by which the covariate leads the target.
    #[arg(long, default_value_t = 0)]
    pub lead: usize,
}

/// Config file values with flag overrides applied. Relative data paths in
/// a config file resolve against the file's directory.
fn merged_config(args: &RunArgs, oracle: Option<&str>, num_test_windows: Option<usize>) -> Result<RunConfig> {
    let mut c = match &args.config {
        Some(path) => {
            let mut c = RunConfig::load(path)?;
            if let (Some(data), Some(dir)) = (&c.dataset.path, path.parent()) {
                if data.is_relative() {
                    c.dataset.path = Some(dir.join(data));
                }
            }
            c
        }
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src.clone() {
                $dst = Some(v);
            }
        };
    }
    set!(c.dataset.path, args.data);
    set!(c.dataset.target, args.target);
    set!(c.dataset.covariates, args.covariates);
    set!(c.dataset.frequency, args.frequency);
    set!(c.task.history, args.history);
    set!(c.task.horizon, args.horizon);
    set!(c.task.min_context, args.min_context);
    set!(c.task.seasonality, args.seasonality);
    set!(c.task.lags, args.lags);
    set!(c.task.pos_dim, args.pos_dim);
    set!(c.adapter.strategy, args.strategy);
    set!(c.adapter.windows, args.k);
    set!(c.adapter.search, args.search);
    set!(c.run.seed, args.seed);
    set!(c.run.num_test_windows, num_test_windows);
    set!(c.oracle.timeout_secs, args.oracle_timeout);
    if let Some(sel) = oracle {
        c.oracle.kind = Some(sel.to_string());
        c.oracle.endpoint = None;
    }
    Ok(c)
}

fn adapter_config(c: &RunConfig) -> Result<AdapterConfig> {
    let search_space = match c.adapter.search.as_deref() {
        None | Some("full") => SearchSpace::default(),
        Some("compact") => SearchSpace::compact(),
        Some(other) => return Err(Error::config(format!("unknown search grid '{other}'"))),
    };
    Ok(AdapterConfig {
        window_strategy: c.strategy()?,
        windows: c.adapter.windows.unwrap_or(covadapt_core::adapter::DEFAULT_WINDOWS),
        search_space,
        ..AdapterConfig::default()
    })
}

fn oracle_selector(c: &RunConfig) -> Result<OracleSelector> {
    Ok(c.oracle_selector().as_deref().unwrap_or("seasonal-naive").parse()?)
}

fn timeout(c: &RunConfig) -> Duration {
    c.oracle.timeout_secs.map_or(DEFAULT_TIMEOUT, Duration::from_secs)
}

fn experiment(c: &RunConfig) -> Result<Experiment> {
    let dataset = c.dataset_config()?;
    let table = load_csv(&dataset)?;
    Ok(Experiment::new(table, dataset, c.task.clone(), c.run.seed.unwrap_or(0)))
}

#[derive(Serialize)]
struct ForecastRow {
    t: usize,
    point: f64,
    variance: f64,
    reverted: bool,
}

#[derive(Serialize)]
struct ForecastSummary {
    oracle: String,
    seed: u64,
    history: usize,
    horizon: usize,
    min_context: usize,
    lags: usize,
    pos_dim: usize,
    strategy: String,
    oracle_calls: usize,
    reverted: usize,
    degenerate: bool,
    window_fallback: bool,
    window_starts: Vec<usize>,
    kernel: Option<String>,
    features: Option<String>,
    validation_mae: Option<f64>,
    filter_threshold: Option<f64>,
    pseudo_smape: Option<f64>,
}

pub fn cmd_forecast(args: &ForecastArgs) -> Result<()> {
    let c = merged_config(&args.run, args.oracle.as_deref(), None)?;
    let dataset = c.dataset_config()?;
    let table = load_csv(&dataset)?;
    let (instance, origin) = forecast_instance(&table, &dataset)?;
    let spec = c.task_spec(dataset.history_len, dataset.horizon_len, dataset.seasonality)?;
    let selector = oracle_selector(&c)?;
    let config = adapter_config(&c)?;
    let oracle = selector.connect(dataset.seasonality, timeout(&c))?;
    let out = run_adapter(&instance, &spec, oracle, &config)?;

    let r = &out.result;
    let rows: Vec<ForecastRow> = (0..r.point.len())
        .map(|j| ForecastRow { t: origin + j + 1, point: r.point[j], variance: r.variance[j], reverted: r.reverted_mask[j] })
        .collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in &rows {
        w.serialize(row).expect("forecast rows serialize");
    }
    write_atomic(&args.out, &w.into_inner().expect("in-memory writer"))?;

    let summary = ForecastSummary {
        oracle: selector.to_string(),
        seed: spec.seed,
        history: spec.history_len,
        horizon: spec.horizon_len,
        min_context: spec.min_context,
        lags: spec.lag_count,
        pos_dim: spec.pos_dim,
        strategy: config.window_strategy.as_str().to_string(),
        oracle_calls: r.oracle_calls,
        reverted: r.reverted_count(),
        degenerate: out.degenerate,
        window_fallback: out.window_fallback,
        window_starts: out.windows.starts.clone(),
        kernel: out.tuned.as_ref().map(|t| {
            let k = &t.kernel;
            format!(
                "{}+{} lengthscale={} variance={} noise={}",
                k.k1_kind, k.k2_kind, k.k1.lengthscale, k.k1.variance, k.noise_variance
            )
        }),
        features: out.tuned.as_ref().map(|t| t.features.to_string()),
        validation_mae: out.tuned.as_ref().map(|t| t.validation_mae),
        filter_threshold: out.filter.as_ref().map(|f| f.threshold).filter(|t| t.is_finite()),
        pseudo_smape: out.pseudo_smape,
    };
    let mut bytes = serde_json::to_vec_pretty(&summary).expect("summary serializes");
    bytes.push(b'\n');
    write_atomic(&args.out.with_extension("json"), &bytes)
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let c = merged_config(&args.run, args.oracle.as_deref(), args.num_test_windows)?;
    let methods = parse_methods(&args.methods)?;
    let settings =
        Settings { oracle: oracle_selector(&c)?, adapter: adapter_config(&c)?, timeout: timeout(&c), jobs: args.jobs.max(1) };
    let report = run_benchmark(&[experiment(&c)?], &methods, &settings)?;
    report.write(&args.report_dir, "evaluation")
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<()> {
    let kind: AblationKind = args.kind.parse()?;
    let mut c = merged_config(&args.run, None, args.num_test_windows)?;
    let oracles = if args.oracle.is_empty() {
        vec![oracle_selector(&c)?]
    } else {
        args.oracle.iter().map(|s| s.parse()).collect::<covadapt_core::Result<Vec<OracleSelector>>>()?
    };
    let geometries = match &args.geometries {
        Some(list) => parse_geometries(list)?,
        None => DEFAULT_GEOMETRIES.to_vec(),
    };
    if kind == AblationKind::Geometry {
        // the sweep sets the geometry; the first pair stands in for unset keys
        let (h, f) = geometries.first().copied().ok_or_else(|| Error::config("empty geometry list"))?;
        c.task.history.get_or_insert(h);
        c.task.horizon.get_or_insert(f);
    }
    let settings =
        Settings { oracle: oracles[0].clone(), adapter: adapter_config(&c)?, timeout: timeout(&c), jobs: args.jobs.max(1) };
    let plan = AblationPlan { kind, oracles, geometries };
    let report = run_ablations(&plan, &experiment(&c)?, &settings)?;
    report.write(&args.report_dir, &format!("ablation_{}", kind.as_str()))
}

pub fn cmd_gen_synthetic(args: &SyntheticArgs) -> Result<()> {
    let spec = SyntheticSpec {
        length: args.length,
        seasonality: args.seasonality,
        coupling: args.coupling,
        noise_std: args.noise_std,
        amplitude: args.amplitude,
        lead: args.lead,
        seed: args.seed,
    };
    gen_synthetic(&spec)?.write_csv(&args.out)
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Forecast(a) => cmd_forecast(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::GenSynthetic(a) => cmd_gen_synthetic(a),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn flags_override_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(
            &path,
            "[dataset]\npath = \"d.csv\"\ntarget = \"y\"\n[task]\nhistory = 96\nhorizon = 12\nseasonality = 12\n[run]\nseed = 3\n",
        )
        .unwrap();
        let args = RunArgs { config: Some(path), horizon: Some(6), seed: Some(9), ..RunArgs::default() };
        let c = merged_config(&args, Some("ar:2"), None).unwrap();
        assert_eq!(c.task.horizon, Some(6));
        assert_eq!(c.task.history, Some(96));
        assert_eq!(c.run.seed, Some(9));
        assert_eq!(c.dataset.path.unwrap(), dir.path().join("d.csv"));
        assert_eq!(oracle_selector(&RunConfig { oracle: c.oracle.clone(), ..RunConfig::default() }).unwrap(), OracleSelector::Ar(2));
    }

    #[test]
    fn unknown_search_grid() {
        let c = RunConfig { adapter: crate::ingest::AdapterSection { search: Some("huge".into()), ..Default::default() }, ..Default::default() };
        assert!(adapter_config(&c).is_err());
    }
}
