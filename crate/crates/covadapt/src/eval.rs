//! Rolling evaluation over test windows, ablation runners and reports.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;

use covadapt_core::features::WindowStrategy;
use covadapt_core::oracle::MeteredOracle;
use covadapt_core::{mae, mase, rmse, run_adapter, smape, AdapterConfig, Oracle, OracleRequest, TaskSpec, TimeSeriesInstance};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{make_test_windows, resolve_task_spec, DatasetConfig, Table, TaskSection};
use crate::output::write_atomic;
use crate::remote::{OracleSelector, DEFAULT_TIMEOUT};

/// Forecasting methods a benchmark can compare.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Method {
    Adapter,
    /// The configured oracle on its own, one call per window.
    Oracle,
    /// Adapter without pseudo-forecasts, trained on `k` labeled windows.
    Direct(usize),
    /// A built-in forecaster used directly, independent of the configured
    /// oracle.
    Baseline(OracleSelector),
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Adapter => f.write_str("adapter"),
            Method::Oracle => f.write_str("oracle"),
            Method::Direct(k) => write!(f, "direct-{k}"),
            Method::Baseline(sel) => write!(f, "{sel}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adapter" => Ok(Method::Adapter),
            "oracle" | "oracle-univariate" => Ok(Method::Oracle),
            _ => {
                if let Some(k) = s.strip_prefix("direct-") {
                    return match k.parse::<usize>() {
                        Ok(k) if k >= 1 => Ok(Method::Direct(k)),
                        _ => Err(Error::config(format!("invalid direct window count in '{s}'"))),
                    };
                }
                let sel: OracleSelector = s.parse().map_err(|_| Error::config(format!("unknown method '{s}'")))?;
                if !sel.is_builtin() {
                    return Err(Error::config(format!("baseline method '{s}' must be a built-in forecaster")));
                }
                Ok(Method::Baseline(sel))
            }
        }
    }
}

pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let methods = list.split(',').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect::<Result<Vec<_>>>()?;
    if methods.is_empty() {
        return Err(Error::config("no methods given"));
    }
    Ok(methods)
}

/// One dataset with its evaluation geometry.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub id: String,
    pub table: Table,
    pub dataset: DatasetConfig,
    pub task: TaskSection,
    pub seed: u64,
}

impl Experiment {
    pub fn new(table: Table, dataset: DatasetConfig, task: TaskSection, seed: u64) -> Self {
        Self { id: dataset.id(), table, dataset, task, seed }
    }

    /// Test windows and task geometry for the configured history/horizon.
    pub fn windows(&self) -> Result<(Vec<TimeSeriesInstance>, TaskSpec)> {
        self.windows_for(self.dataset.history_len, self.dataset.horizon_len, &self.task)
    }

    fn windows_for(&self, history: usize, horizon: usize, task: &TaskSection) -> Result<(Vec<TimeSeriesInstance>, TaskSpec)> {
        let dataset = DatasetConfig { history_len: history, horizon_len: horizon, ..self.dataset.clone() };
        let instances = make_test_windows(&self.table, &dataset)?;
        let spec = resolve_task_spec(task, self.seed, history, horizon, self.dataset.seasonality)?;
        Ok((instances, spec))
    }
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub oracle: OracleSelector,
    pub adapter: AdapterConfig,
    pub timeout: Duration,
    pub jobs: usize,
}

impl Settings {
    pub fn new(oracle: OracleSelector, adapter: AdapterConfig) -> Self {
        Self { oracle, adapter, timeout: DEFAULT_TIMEOUT, jobs: 1 }
    }

    /// Settings echoed into JSON reports. The job count is left out so
    /// reports do not depend on it.
    pub fn echo(&self) -> serde_json::Value {
        let a = &self.adapter;
        serde_json::json!({
            "oracle": self.oracle.to_string(),
            "strategy": a.window_strategy.as_str(),
            "windows": a.windows,
            "search_candidates": a.search_space.len(),
            "filter_grid": a.filter_grid.iter().map(|c| format!("{c:?}")).collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub dataset: String,
    pub window: usize,
    pub method: String,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub smape: Option<f64>,
    pub smape_nonzero: Option<f64>,
    pub mase: Option<f64>,
    pub oracle_calls: usize,
    pub reverted: usize,
    /// Set when the window failed; the metrics are then empty.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub dataset: String,
    pub method: String,
    pub windows: usize,
    pub failed: usize,
    pub mae: Option<f64>,
    pub rmse: Option<f64>,
    pub smape: Option<f64>,
    pub smape_nonzero: Option<f64>,
    pub mase: Option<f64>,
}

/// Average MAE improvement over the oracle, in percent, averaged over
/// datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gain {
    pub method: String,
    pub datasets: usize,
    pub gain_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub seed: u64,
    pub config: serde_json::Value,
    pub records: Vec<MetricRecord>,
    pub aggregates: Vec<Aggregate>,
    pub gains: Vec<Gain>,
}

struct MethodOutput {
    point: Vec<f64>,
    oracle_calls: usize,
    reverted: usize,
    pseudo_smape: Option<f64>,
}

fn univariate<O: Oracle>(instance: &TimeSeriesInstance, oracle: O) -> Result<MethodOutput> {
    let mut metered = MeteredOracle::new(oracle);
    let request = OracleRequest::new(instance.target(), instance.horizon_len(), 1)?;
    let point = metered.forecast(&request)?.mean;
    Ok(MethodOutput { point, oracle_calls: metered.ledger().calls, reverted: 0, pseudo_smape: None })
}

fn run_method(instance: &TimeSeriesInstance, spec: &TaskSpec, method: &Method, settings: &Settings) -> Result<MethodOutput> {
    let s = instance.seasonality();
    let adapt = |config: &AdapterConfig| -> Result<MethodOutput> {
        let oracle = settings.oracle.connect(s, settings.timeout)?;
        let out = run_adapter(instance, spec, oracle, config)?;
        Ok(MethodOutput {
            reverted: out.result.reverted_count(),
            oracle_calls: out.result.oracle_calls,
            point: out.result.point,
            pseudo_smape: out.pseudo_smape,
        })
    };
    match method {
        Method::Adapter => adapt(&settings.adapter),
        Method::Direct(k) => adapt(&AdapterConfig { direct_mode: Some(*k), ..settings.adapter.clone() }),
        Method::Oracle => univariate(instance, settings.oracle.connect(s, settings.timeout)?),
        Method::Baseline(sel) => univariate(instance, sel.connect(s, settings.timeout)?),
    }
}

fn optional(r: covadapt_core::Result<f64>) -> Result<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(covadapt_core::Error::Degenerate(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn record(dataset: &str, window: usize, method: &Method, instance: &TimeSeriesInstance, out: Result<&MethodOutput>) -> MetricRecord {
    let scored = out.and_then(|o| {
        let truth = instance
            .horizon_truth()
            .ok_or_else(|| covadapt_core::Error::Geometry("evaluation window without horizon truth".into()))?;
        Ok((
            mae(truth, &o.point)?,
            rmse(truth, &o.point)?,
            smape(truth, &o.point, false)?,
            optional(smape(truth, &o.point, true))?,
            optional(mase(truth, &o.point, instance.target(), instance.seasonality()))?,
            o,
        ))
    });
    let base = MetricRecord {
        dataset: dataset.to_string(),
        window,
        method: method.to_string(),
        mae: None,
        rmse: None,
        smape: None,
        smape_nonzero: None,
        mase: None,
        oracle_calls: 0,
        reverted: 0,
        error: None,
    };
    match scored {
        Ok((mae, rmse, smape, smape_nonzero, mase, o)) => MetricRecord {
            mae: Some(mae),
            rmse: Some(rmse),
            smape: Some(smape),
            smape_nonzero,
            mase,
            oracle_calls: o.oracle_calls,
            reverted: o.reverted,
            ..base
        },
        Err(e) => {
            log::warn!("{dataset} window {window} {method}: {e}");
            MetricRecord { error: Some(e.to_string()), ..base }
        }
    }
}

/// Runs `f` over `0..n` on up to `jobs` threads; results keep index order.
fn parallel_map<T: Send>(n: usize, jobs: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    if jobs <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(n) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let value = f(i);
                slots.lock().expect("no worker panicked")[i] = Some(value);
            });
        }
    });
    slots.into_inner().expect("no worker panicked").into_iter().map(|v| v.expect("every index ran")).collect()
}

struct Task<'a> {
    dataset: &'a str,
    window: usize,
    instance: &'a TimeSeriesInstance,
    spec: &'a TaskSpec,
    method: &'a Method,
}

struct Evaluated {
    record: MetricRecord,
    pseudo_smape: Option<f64>,
}

fn evaluate_tasks(tasks: &[Task<'_>], settings: &Settings) -> Vec<Evaluated> {
    parallel_map(tasks.len(), settings.jobs, |i| {
        let t = &tasks[i];
        let out = run_method(t.instance, t.spec, t.method, settings);
        let pseudo_smape = out.as_ref().ok().and_then(|o| o.pseudo_smape);
        Evaluated { record: record(t.dataset, t.window, t.method, t.instance, out.as_ref().map_err(clone_err)), pseudo_smape }
    })
}

fn clone_err(e: &Error) -> Error {
    match e {
        Error::Core(c) => Error::Core(c.clone()),
        other => covadapt_core::Error::Oracle(other.to_string()).into(),
    }
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

fn aggregate(records: &[MetricRecord]) -> Vec<Aggregate> {
    let mut keys: Vec<(&str, &str)> = records.iter().map(|r| (r.dataset.as_str(), r.method.as_str())).collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .map(|(dataset, method)| {
            let group: Vec<&MetricRecord> = records.iter().filter(|r| r.dataset == dataset && r.method == method).collect();
            Aggregate {
                dataset: dataset.to_string(),
                method: method.to_string(),
                windows: group.len(),
                failed: group.iter().filter(|r| r.error.is_some()).count(),
                mae: mean_of(group.iter().map(|r| r.mae)),
                rmse: mean_of(group.iter().map(|r| r.rmse)),
                smape: mean_of(group.iter().map(|r| r.smape)),
                smape_nonzero: mean_of(group.iter().map(|r| r.smape_nonzero)),
                mase: mean_of(group.iter().map(|r| r.mase)),
            }
        })
        .collect()
}

pub fn gain_pct(reference_mae: f64, method_mae: f64) -> f64 {
    100.0 * (reference_mae - method_mae) / reference_mae
}

fn gains(aggregates: &[Aggregate], methods: &[Method]) -> Vec<Gain> {
    let reference = Method::Oracle.to_string();
    methods
        .iter()
        .filter(|m| **m != Method::Oracle)
        .filter_map(|m| {
            let name = m.to_string();
            let per_dataset: Vec<f64> = aggregates
                .iter()
                .filter(|a| a.method == name)
                .filter_map(|a| {
                    let base = aggregates.iter().find(|b| b.dataset == a.dataset && b.method == reference)?;
                    match (base.mae, a.mae) {
                        (Some(r), Some(v)) if r > 0.0 => Some(gain_pct(r, v)),
                        _ => None,
                    }
                })
                .collect();
            (!per_dataset.is_empty()).then(|| Gain {
                method: name,
                datasets: per_dataset.len(),
                gain_pct: per_dataset.iter().sum::<f64>() / per_dataset.len() as f64,
            })
        })
        .collect()
}

fn sort_records(records: &mut [MetricRecord]) {
    records.sort_by(|a, b| (&a.dataset, a.window, &a.method).cmp(&(&b.dataset, b.window, &b.method)));
}

/// Evaluates every method on every test window of every experiment.
pub fn run_benchmark(experiments: &[Experiment], methods: &[Method], settings: &Settings) -> Result<EvaluationReport> {
    if methods.is_empty() {
        return Err(Error::config("no methods given"));
    }
    let prepared = experiments.iter().map(|e| e.windows().map(|w| (e, w))).collect::<Result<Vec<_>>>()?;
    let mut tasks = Vec::new();
    for (experiment, (instances, spec)) in &prepared {
        for (window, instance) in instances.iter().enumerate() {
            for method in methods {
                tasks.push(Task { dataset: &experiment.id, window, instance, spec, method });
            }
        }
    }
    let mut records: Vec<MetricRecord> = evaluate_tasks(&tasks, settings).into_iter().map(|e| e.record).collect();
    sort_records(&mut records);
    let aggregates = aggregate(&records);
    let gains = gains(&aggregates, methods);
    let seed = experiments.first().map_or(0, |e| e.seed);
    let mut config = settings.echo();
    config["methods"] = methods.iter().map(ToString::to_string).collect::<Vec<_>>().into();
    config["datasets"] = experiments.iter().map(|e| serde_json::to_value(&e.dataset).expect("dataset config serializes")).collect();
    Ok(EvaluationReport { seed, config, records, aggregates, gains })
}

pub const RECORD_COLUMNS: [&str; 11] =
    ["dataset", "window", "method", "mae", "rmse", "smape", "smape_nonzero", "mase", "oracle_calls", "reverted", "error"];

pub fn records_to_csv(records: &[MetricRecord]) -> Vec<u8> {
    rows_to_csv(records)
}

pub fn records_from_csv(bytes: &[u8]) -> Result<Vec<MetricRecord>> {
    let mut reader = csv::Reader::from_reader(bytes);
    reader
        .deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::Parse { path: "<report>".into(), row: i + 1, column: String::new(), message: e.to_string() })
        })
        .collect()
}

fn rows_to_csv<T: Serialize>(rows: &[T]) -> Vec<u8> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row).expect("rows serialize to csv");
    }
    writer.into_inner().expect("in-memory writer")
}

fn write_pair<T: Serialize, J: Serialize>(dir: &Path, stem: &str, rows: &[T], json: &J) -> Result<()> {
    write_atomic(&dir.join(format!("{stem}.csv")), &rows_to_csv(rows))?;
    let mut bytes = serde_json::to_vec_pretty(json).expect("report serializes");
    bytes.push(b'\n');
    write_atomic(&dir.join(format!("{stem}.json")), &bytes)
}

impl EvaluationReport {
    /// Writes `<stem>.csv` (per-window records) and `<stem>.json`.
    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        write_pair(dir, stem, &self.records, self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationKind {
    Pseudo,
    Windows,
    Geometry,
}

impl FromStr for AblationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pseudo" => Ok(AblationKind::Pseudo),
            "windows" => Ok(AblationKind::Windows),
            "geometry" => Ok(AblationKind::Geometry),
            other => Err(Error::config(format!("unknown ablation kind '{other}'"))),
        }
    }
}

impl AblationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AblationKind::Pseudo => "pseudo",
            AblationKind::Windows => "windows",
            AblationKind::Geometry => "geometry",
        }
    }
}

pub const DIRECT_WINDOW_COUNTS: [usize; 3] = [3, 5, 8];
pub const DEFAULT_GEOMETRIES: [(usize, usize); 5] = [(672, 24), (672, 96), (672, 168), (1344, 24), (2016, 24)];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoRow {
    pub oracle: String,
    pub dataset: String,
    pub config: String,
    pub windows: usize,
    pub failed: usize,
    pub mae: Option<f64>,
    pub smape: Option<f64>,
    pub oracle_calls: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyRow {
    pub oracle: String,
    pub dataset: String,
    pub strategy: String,
    /// `final_smape` or `pseudo_smape`.
    pub metric: String,
    pub windows: usize,
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryRow {
    pub oracle: String,
    pub dataset: String,
    pub history: usize,
    pub horizon: usize,
    pub windows: usize,
    pub adapter_mae: Option<f64>,
    pub univariate_mae: Option<f64>,
    /// Percent MAE improvement of the adapter over the oracle.
    pub gain: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "rows", rename_all = "lowercase")]
pub enum AblationRows {
    Pseudo(Vec<PseudoRow>),
    Windows(Vec<StrategyRow>),
    Geometry(Vec<GeometryRow>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seed: u64,
    pub config: serde_json::Value,
    #[serde(flatten)]
    pub rows: AblationRows,
}

impl AblationReport {
    pub fn len(&self) -> usize {
        match &self.rows {
            AblationRows::Pseudo(r) => r.len(),
            AblationRows::Windows(r) => r.len(),
            AblationRows::Geometry(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        match &self.rows {
            AblationRows::Pseudo(r) => write_pair(dir, stem, r, self),
            AblationRows::Windows(r) => write_pair(dir, stem, r, self),
            AblationRows::Geometry(r) => write_pair(dir, stem, r, self),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AblationPlan {
    pub kind: AblationKind,
    pub oracles: Vec<OracleSelector>,
    /// `(H, F)` pairs swept by the geometry ablation.
    pub geometries: Vec<(usize, usize)>,
}

fn pseudo_rows(experiment: &Experiment, settings: &Settings) -> Result<Vec<PseudoRow>> {
    let methods: Vec<Method> =
        std::iter::once(Method::Adapter).chain(DIRECT_WINDOW_COUNTS.iter().map(|&k| Method::Direct(k))).collect();
    let report = run_benchmark(std::slice::from_ref(experiment), &methods, settings)?;
    Ok(methods
        .iter()
        .map(|m| {
            let name = m.to_string();
            let agg = report.aggregates.iter().find(|a| a.method == name).expect("every method aggregated");
            let calls = report.records.iter().filter(|r| r.method == name).map(|r| r.oracle_calls).max().unwrap_or(0);
            PseudoRow {
                oracle: settings.oracle.to_string(),
                dataset: experiment.id.clone(),
                config: if *m == Method::Adapter { "pseudo".into() } else { name },
                windows: agg.windows,
                failed: agg.failed,
                mae: agg.mae,
                smape: agg.smape,
                oracle_calls: calls,
            }
        })
        .collect())
}

fn strategy_rows(experiment: &Experiment, settings: &Settings) -> Result<Vec<StrategyRow>> {
    let (instances, spec) = experiment.windows()?;
    let configs: Vec<Settings> = WindowStrategy::ALL
        .iter()
        .map(|&strategy| Settings {
            adapter: AdapterConfig { window_strategy: strategy, ..settings.adapter.clone() },
            ..settings.clone()
        })
        .collect();
    let mut rows = Vec::new();
    for (strategy, config) in WindowStrategy::ALL.iter().zip(&configs) {
        let tasks: Vec<Task<'_>> = instances
            .iter()
            .enumerate()
            .map(|(window, instance)| Task { dataset: &experiment.id, window, instance, spec: &spec, method: &Method::Adapter })
            .collect();
        let evaluated = evaluate_tasks(&tasks, config);
        let final_smape = mean_of(evaluated.iter().map(|e| e.record.smape));
        let pseudo_smape = mean_of(evaluated.iter().map(|e| e.pseudo_smape));
        for (metric, value) in [("final_smape", final_smape), ("pseudo_smape", pseudo_smape)] {
            rows.push(StrategyRow {
                oracle: settings.oracle.to_string(),
                dataset: experiment.id.clone(),
                strategy: strategy.as_str().to_string(),
                metric: metric.to_string(),
                windows: instances.len(),
                value,
            });
        }
    }
    Ok(rows)
}

fn geometry_rows(experiment: &Experiment, settings: &Settings, geometries: &[(usize, usize)]) -> Vec<GeometryRow> {
    // min_context and lags are re-derived for each geometry
    let task = TaskSection { min_context: None, lags: None, ..experiment.task.clone() };
    geometries
        .iter()
        .map(|&(history, horizon)| {
            let base = GeometryRow {
                oracle: settings.oracle.to_string(),
                dataset: experiment.id.clone(),
                history,
                horizon,
                windows: 0,
                adapter_mae: None,
                univariate_mae: None,
                gain: None,
                error: None,
            };
            let (instances, spec) = match experiment.windows_for(history, horizon, &task) {
                Ok(w) => w,
                Err(e) => return GeometryRow { error: Some(e.to_string()), ..base },
            };
            let methods = [Method::Adapter, Method::Oracle];
            let tasks: Vec<Task<'_>> = instances
                .iter()
                .enumerate()
                .flat_map(|(window, instance)| {
                    let spec = &spec;
                    let id = experiment.id.as_str();
                    methods.iter().map(move |method| Task { dataset: id, window, instance, spec, method })
                })
                .collect();
            let records: Vec<MetricRecord> = evaluate_tasks(&tasks, settings).into_iter().map(|e| e.record).collect();
            let mean_mae = |m: &Method| mean_of(records.iter().filter(|r| r.method == m.to_string()).map(|r| r.mae));
            let (adapter_mae, univariate_mae) = (mean_mae(&Method::Adapter), mean_mae(&Method::Oracle));
            let gain = match (univariate_mae, adapter_mae) {
                (Some(u), Some(a)) if u > 0.0 => Some(gain_pct(u, a)),
                _ => None,
            };
            let error = records.iter().find_map(|r| r.error.clone());
            GeometryRow { windows: instances.len(), adapter_mae, univariate_mae, gain, error, ..base }
        })
        .collect()
}

pub fn run_ablations(plan: &AblationPlan, experiment: &Experiment, settings: &Settings) -> Result<AblationReport> {
    if plan.oracles.is_empty() {
        return Err(Error::config("no oracle given"));
    }
    let per_oracle = plan.oracles.iter().map(|oracle| Settings { oracle: oracle.clone(), ..settings.clone() });
    let rows = match plan.kind {
        AblationKind::Pseudo => {
            AblationRows::Pseudo(per_oracle.map(|s| pseudo_rows(experiment, &s)).collect::<Result<Vec<_>>>()?.concat())
        }
        AblationKind::Windows => {
            AblationRows::Windows(per_oracle.map(|s| strategy_rows(experiment, &s)).collect::<Result<Vec<_>>>()?.concat())
        }
        AblationKind::Geometry => {
            AblationRows::Geometry(per_oracle.flat_map(|s| geometry_rows(experiment, &s, &plan.geometries)).collect())
        }
    };
    let mut config = settings.echo();
    config["oracles"] = plan.oracles.iter().map(ToString::to_string).collect::<Vec<_>>().into();
    config["dataset"] = serde_json::to_value(&experiment.dataset).expect("dataset config serializes");
    if plan.kind == AblationKind::Geometry {
        config["geometries"] = plan.geometries.iter().map(|&(h, f)| serde_json::json!([h, f])).collect();
    }
    Ok(AblationReport { seed: experiment.seed, config, rows })
}

/// Parses `672x24,1344x24`.
pub fn parse_geometries(list: &str) -> Result<Vec<(usize, usize)>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|g| {
            let bad = || Error::config(format!("geometry '{g}' is not of the form HxF"));
            let (h, f) = g.split_once('x').ok_or_else(bad)?;
            Ok((h.parse().map_err(|_| bad())?, f.parse().map_err(|_| bad())?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(dataset: &str, window: usize, method: &str, mae: Option<f64>) -> MetricRecord {
        MetricRecord {
            dataset: dataset.into(),
            window,
            method: method.into(),
            mae,
            rmse: mae,
            smape: mae.map(|m| m / 10.0),
            smape_nonzero: None,
            mase: mae,
            oracle_calls: 5,
            reverted: 1,
            error: mae.is_none().then(|| "oracle: boom, with \"quotes\"".into()),
        }
    }

    #[test]
    fn method_names_round_trip() {
        for s in ["adapter", "oracle", "direct-3", "seasonal-naive", "ar:2"] {
            assert_eq!(s.parse::<Method>().unwrap().to_string(), s);
        }
        assert!("direct-0".parse::<Method>().is_err());
        assert!("exec:foo".parse::<Method>().is_err());
        assert!(parse_methods(" , ").is_err());
    }

    #[test]
    fn gain_of_three_against_four() {
        assert_eq!(gain_pct(4.0, 3.0), 25.0);
    }

    #[test]
    fn aggregates_and_gain_counts() {
        let records = vec![
            rec("d", 0, "adapter", Some(2.0)),
            rec("d", 0, "oracle", Some(4.0)),
            rec("d", 1, "adapter", Some(4.0)),
            rec("d", 1, "oracle", Some(4.0)),
        ];
        let aggs = aggregate(&records);
        assert_eq!(aggs.len(), 2);
        assert_eq!(aggs[0].method, "adapter");
        assert_eq!(aggs[0].mae, Some(3.0));
        let g = gains(&aggs, &[Method::Adapter, Method::Oracle]);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].gain_pct, 25.0);
    }

    #[test]
    fn failed_windows_are_kept_and_excluded_from_means() {
        let records = vec![rec("d", 0, "adapter", Some(2.0)), rec("d", 1, "adapter", None)];
        let aggs = aggregate(&records);
        assert_eq!((aggs[0].windows, aggs[0].failed, aggs[0].mae), (2, 1, Some(2.0)));
    }

    #[test]
    fn csv_round_trip() {
        let records = vec![rec("d", 0, "adapter", Some(0.1 + 0.2)), rec("d", 1, "ar:2", None), rec("e,x", 2, "oracle", Some(1e-300))];
        let bytes = records_to_csv(&records);
        let header = String::from_utf8(bytes.clone()).unwrap().lines().next().unwrap().to_string();
        assert_eq!(header, RECORD_COLUMNS.join(","));
        assert_eq!(records_from_csv(&bytes).unwrap(), records);
    }

    #[test]
    fn geometries_parse() {
        assert_eq!(parse_geometries("672x24, 1344x24").unwrap(), vec![(672, 24), (1344, 24)]);
        assert!(parse_geometries("672-24").is_err());
    }

    #[test]
    fn parallel_map_keeps_order() {
        let out = parallel_map(50, 4, |i| i * i);
        assert_eq!(out, (0..50).map(|i| i * i).collect::<Vec<_>>());
    }
}
