//! CSV loading, test-window construction and run configuration files.

use std::fs;
use std::path::{Path, PathBuf};

use covadapt_core::features::WindowStrategy;
use covadapt_core::instance::{default_lag_count, default_min_context, DEFAULT_POS_DIM};
use covadapt_core::{Matrix, TaskSpec, TimeSeriesInstance};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub path: PathBuf,
    pub target: String,
    pub covariates: Vec<String>,
    pub frequency: String,
    pub seasonality: usize,
    pub history_len: usize,
    pub horizon_len: usize,
    pub num_test_windows: usize,
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.covariates.iter().any(|c| c == &self.target) {
            return Err(Error::config(format!("target '{}' is also listed as a covariate", self.target)));
        }
        if self.num_test_windows == 0 {
            return Err(Error::config("num_test_windows must be at least 1"));
        }
        Ok(())
    }

    /// Short identifier used in reports: the file stem.
    pub fn id(&self) -> String {
        self.path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into())
    }
}

/// Target and covariate columns of a CSV file, in file order.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    pub rows: usize,
    /// Leading rows with a known target; rows after it are future rows that
    /// only carry covariates.
    pub target_known: usize,
    target_index: usize,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.columns[i].as_slice())
    }

    pub fn target(&self) -> &[f64] {
        &self.columns[self.target_index]
    }
}

/// Reads the target and covariate columns. Other columns (timestamps, ids)
/// are ignored. Empty target cells are accepted only as one trailing block.
pub fn load_csv(config: &DatasetConfig) -> Result<Table> {
    config.validate()?;
    let path = &config.path;
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text, config)
}

fn parse_csv(text: &str, config: &DatasetConfig) -> Result<Table> {
    let path = &config.path;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let csv_err = |e: csv::Error, row: usize| Error::Parse {
        path: path.clone(),
        row,
        column: String::new(),
        message: e.to_string(),
    };
    let header = reader.headers().map_err(|e| csv_err(e, 0))?.clone();
    let wanted: Vec<&str> = std::iter::once(config.target.as_str()).chain(config.covariates.iter().map(String::as_str)).collect();
    for name in &wanted {
        if !header.iter().any(|h| h == *name) {
            return Err(Error::MissingColumn { path: path.clone(), column: name.to_string() });
        }
    }
    let picked: Vec<(usize, String)> =
        header.iter().enumerate().filter(|(_, h)| wanted.contains(h)).map(|(i, h)| (i, h.to_string())).collect();
    let target_index = picked.iter().position(|(_, h)| h == &config.target).expect("target is present");

    let mut columns = vec![Vec::new(); picked.len()];
    let mut target_known = None;
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| csv_err(e, row))?;
        for (c, (field, name)) in picked.iter().enumerate() {
            let cell = record.get(*field).unwrap_or("");
            if c == target_index && cell.is_empty() {
                target_known.get_or_insert(r);
                continue;
            }
            let bad = |message: String| Error::Parse { path: path.clone(), row, column: name.clone(), message };
            if c == target_index && target_known.is_some() {
                return Err(bad("target value after an empty target cell".into()));
            }
            let value: f64 = cell.parse().map_err(|_| bad(format!("'{cell}' is not a number")))?;
            if !value.is_finite() {
                return Err(bad(format!("'{cell}' is not finite")));
            }
            columns[c].push(value);
        }
        rows += 1;
    }
    Ok(Table {
        names: picked.into_iter().map(|(_, h)| h).collect(),
        columns,
        rows,
        target_known: target_known.unwrap_or(rows),
        target_index,
    })
}

fn window_covariates(table: &Table, config: &DatasetConfig, rows: std::ops::Range<usize>) -> Result<Matrix> {
    let cols: Vec<&[f64]> = config
        .covariates
        .iter()
        .map(|name| table.column(name).expect("covariate columns are loaded"))
        .collect();
    let n = rows.len();
    let data = rows.flat_map(|r| cols.iter().map(move |c| c[r])).collect();
    Ok(Matrix::from_row_major(n, cols.len(), data)?)
}

/// Non-overlapping evaluation instances tiled backward from the last row.
/// Instance `i` (0-based) forecasts the rows
/// `[T - (n - i)F, T - (n - i - 1)F)`, with the `H` rows before as history.
pub fn make_test_windows(table: &Table, config: &DatasetConfig) -> Result<Vec<TimeSeriesInstance>> {
    config.validate()?;
    let (hist, f, n) = (config.history_len, config.horizon_len, config.num_test_windows);
    if f == 0 || hist == 0 {
        return Err(covadapt_core::Error::Geometry("history and horizon must be at least 1".into()).into());
    }
    let total = table.target_known;
    let need = hist + n * f;
    if total < need {
        return Err(covadapt_core::Error::Geometry(format!(
            "{} rows with a known target, {n} windows of H={hist}, F={f} need {need}",
            total
        ))
        .into());
    }
    let y = table.target();
    (0..n)
        .map(|i| {
            let origin = total - (n - i) * f;
            let covariates = window_covariates(table, config, origin - hist..origin + f)?;
            Ok(TimeSeriesInstance::new(
                y[origin - hist..origin].to_vec(),
                covariates,
                f,
                Some(y[origin..origin + f].to_vec()),
                config.frequency.clone(),
                config.seasonality,
            )?)
        })
        .collect()
}

/// The instance that forecasts the `F` rows after the last known target.
/// Returns the instance and the 0-based row index of the first forecast step.
pub fn forecast_instance(table: &Table, config: &DatasetConfig) -> Result<(TimeSeriesInstance, usize)> {
    config.validate()?;
    let (hist, f) = (config.history_len, config.horizon_len);
    let origin = table.target_known;
    if hist == 0 || f == 0 || origin < hist {
        return Err(covadapt_core::Error::Geometry(format!(
            "history of {hist} rows requested, {origin} rows have a known target"
        ))
        .into());
    }
    if !config.covariates.is_empty() && table.rows < origin + f {
        return Err(covadapt_core::Error::Geometry(format!(
            "covariates are needed for {f} future rows after row {origin}, the file has {} more",
            table.rows - origin
        ))
        .into());
    }
    let covariates = window_covariates(table, config, origin - hist..origin + f)?;
    let y = table.target();
    let instance = TimeSeriesInstance::new(
        y[origin - hist..origin].to_vec(),
        covariates,
        f,
        None,
        config.frequency.clone(),
        config.seasonality,
    )?;
    Ok((instance, origin))
}

/// `TaskSpec` from optional overrides; unset keys take the documented
/// defaults for the given geometry.
pub fn resolve_task_spec(task: &TaskSection, seed: u64, history: usize, horizon: usize, seasonality: usize) -> Result<TaskSpec> {
    let min_context = task.min_context.unwrap_or_else(|| default_min_context(history, horizon, seasonality));
    Ok(TaskSpec::new(
        history,
        horizon,
        min_context,
        task.lags.unwrap_or_else(|| default_lag_count(seasonality, min_context)),
        task.pos_dim.unwrap_or(DEFAULT_POS_DIM),
        seed,
    )?)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub dataset: DatasetSection,
    #[serde(default)]
    pub task: TaskSection,
    #[serde(default)]
    pub oracle: OracleSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub adapter: AdapterSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub path: Option<PathBuf>,
    pub target: Option<String>,
    pub covariates: Option<Vec<String>>,
    pub frequency: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub history: Option<usize>,
    pub horizon: Option<usize>,
    pub min_context: Option<usize>,
    pub seasonality: Option<usize>,
    pub lags: Option<usize>,
    pub pos_dim: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub kind: Option<String>,
    pub endpoint: Option<String>,
    pub timeout_secs: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub seed: Option<u64>,
    pub num_test_windows: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterSection {
    pub strategy: Option<String>,
    pub windows: Option<usize>,
    /// `full` or `compact`.
    pub search: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Core(covadapt_core::Error::Config(m)) => Error::config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.message().to_string()))
    }

    /// `oracle.kind` combined with `oracle.endpoint` into a CLI-style
    /// selector (`exec` and `http` take the endpoint as argument).
    pub fn oracle_selector(&self) -> Option<String> {
        let kind = self.oracle.kind.as_deref()?;
        Some(match (kind, self.oracle.endpoint.as_deref()) {
            ("exec" | "http", Some(endpoint)) => format!("{kind}:{endpoint}"),
            (_, _) => kind.to_string(),
        })
    }

    pub fn dataset_config(&self) -> Result<DatasetConfig> {
        let missing = |key: &str| Error::config(format!("missing required key {key}"));
        let config = DatasetConfig {
            path: self.dataset.path.clone().ok_or_else(|| missing("dataset.path"))?,
            target: self.dataset.target.clone().ok_or_else(|| missing("dataset.target"))?,
            covariates: self.dataset.covariates.clone().unwrap_or_default(),
            frequency: self.dataset.frequency.clone().unwrap_or_default(),
            seasonality: self.task.seasonality.ok_or_else(|| missing("task.seasonality"))?,
            history_len: self.task.history.ok_or_else(|| missing("task.history"))?,
            horizon_len: self.task.horizon.ok_or_else(|| missing("task.horizon"))?,
            num_test_windows: self.run.num_test_windows.unwrap_or(1),
        };
        config.validate()?;
        Ok(config)
    }

    /// Task geometry with defaults filled in for unset keys.
    pub fn task_spec(&self, history: usize, horizon: usize, seasonality: usize) -> Result<TaskSpec> {
        resolve_task_spec(&self.task, self.run.seed.unwrap_or(0), history, horizon, seasonality)
    }

    pub fn strategy(&self) -> Result<WindowStrategy> {
        match &self.adapter.strategy {
            None => Ok(WindowStrategy::ZScore),
            Some(s) => Ok(s.parse()?),
        }
    }
}
