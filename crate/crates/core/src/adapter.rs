//! End-to-end adaptation of one instance.
//!
//! Oracle calls, in order: one per Stage-I window `M(Y_{1:h_i})`, one for the
//! validation region `M(Y_{1:H-F})`, one for the horizon `M(Y_{1:H})`. The
//! budget is therefore `K + 2` (or `k + 2` in direct mode) regardless of the
//! history length.

use alloc::vec;
use alloc::vec::Vec;

use crate::bayes::{BayesRidgeModel, BayesRidgeOptions};
use crate::error::{Error, Result};
use crate::features::{lag_vector, push_positional_encoding, select_windows_before, WindowChoice, WindowStrategy};
use crate::filter::{default_filter_grid, tune_filter_threshold, uncertainty_filter, FilterCandidate, FilterChoice};
use crate::gp::{GpModel, Scaling};
use crate::instance::{validate_instance, ForecastResult, TaskSpec, TimeSeriesInstance};
use crate::linalg::Matrix;
use crate::math::mean_std;
use crate::metrics::smape;
use crate::oracle::{MeteredOracle, Oracle, OracleRequest};
use crate::pseudo::{build_stage1_training_set, extend_with_forecast, fit_generator, generate_pseudo_forecasts, PseudoForecasts};
use crate::tune::{tune_gp, SearchSpace, Stage2Rows, TuneOutcome};

pub const DEFAULT_WINDOWS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct AdapterConfig {
    pub window_strategy: WindowStrategy,
    /// Stage-I windows `K`.
    pub windows: usize,
    /// Threshold grid; "off" is always a candidate, so an empty grid
    /// disables filtering.
    pub filter_grid: Vec<FilterCandidate>,
    pub search_space: SearchSpace,
    /// Ablation: skip the generator and train the GP on this many labeled
    /// windows only.
    pub direct_mode: Option<usize>,
    pub generator: BayesRidgeOptions,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            window_strategy: WindowStrategy::ZScore,
            windows: DEFAULT_WINDOWS,
            filter_grid: default_filter_grid(),
            search_space: SearchSpace::default(),
            direct_mode: None,
            generator: BayesRidgeOptions::default(),
        }
    }
}

impl AdapterConfig {
    pub fn direct(k: usize) -> Self {
        Self { direct_mode: Some(k), ..Self::default() }
    }

    /// Oracle calls one run consumes.
    pub fn budget(&self) -> usize {
        self.direct_mode.unwrap_or(self.windows) + 2
    }

    fn validate(&self) -> Result<()> {
        if self.windows == 0 || self.direct_mode == Some(0) {
            return Err(Error::Config("window count must be at least 1".into()));
        }
        for c in &self.filter_grid {
            if let FilterCandidate::Quantile(q) = c {
                if !(*q > 0.0 && *q <= 1.0) {
                    return Err(Error::Config(alloc::format!("filter quantile {q} outside (0, 1]")));
                }
            }
        }
        Ok(())
    }
}

/// Everything a run produced besides the forecast itself.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterOutcome {
    pub result: ForecastResult,
    /// The oracle's own horizon forecast `M(Y_{1:H})`.
    pub oracle_forecast: Vec<f64>,
    pub gp_mean: Vec<f64>,
    pub windows: WindowChoice,
    /// Z-score selection was undefined and the latest windows were used.
    pub window_fallback: bool,
    /// Constant history: the oracle forecast was returned unmodified.
    pub degenerate: bool,
    pub tuned: Option<TuneOutcome>,
    pub filter: Option<FilterChoice>,
    /// SMAPE of history pseudo-forecasts against the true history over
    /// `[L+1, H]`; absent in direct mode.
    pub pseudo_smape: Option<f64>,
}

/// Stage-I results on their own, used by the window-strategy ablation.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Report {
    pub windows: WindowChoice,
    pub window_fallback: bool,
    pub generator: BayesRidgeModel,
    pub pseudo: PseudoForecasts,
    pub pseudo_smape: f64,
    pub oracle_calls: usize,
}

struct Labeled {
    windows: WindowChoice,
    window_fallback: bool,
    forecasts: Vec<Vec<f64>>,
}

fn choose_windows(y: &[f64], spec: &TaskSpec, strategy: WindowStrategy, count: usize, end: usize) -> Result<(WindowChoice, bool)> {
    let pick = |s| select_windows_before(y, spec.min_context, end, spec.horizon_len, s, count, spec.seed);
    match pick(strategy) {
        Err(Error::Degenerate(msg)) => {
            log::warn!("{msg}; falling back to latest windows");
            Ok((pick(WindowStrategy::Latest)?, true))
        }
        other => other.map(|c| (c, false)),
    }
}

fn call<O: Oracle>(oracle: &mut MeteredOracle<O>, context: &[f64], horizon: usize) -> Result<Vec<f64>> {
    let id = oracle.ledger().calls as u64 + 1;
    let request = OracleRequest::new(context, horizon, id)?;
    Ok(oracle.forecast(&request)?.mean)
}

fn label_windows<O: Oracle>(
    y: &[f64],
    spec: &TaskSpec,
    oracle: &mut MeteredOracle<O>,
    strategy: WindowStrategy,
    count: usize,
    end: usize,
) -> Result<Labeled> {
    let (windows, window_fallback) = choose_windows(y, spec, strategy, count, end)?;
    let forecasts = windows
        .starts
        .iter()
        .map(|&start| call(oracle, &y[..start - 1], spec.horizon_len))
        .collect::<Result<Vec<_>>>()?;
    Ok(Labeled { windows, window_fallback, forecasts })
}

fn fit_stage1(
    y: &[f64],
    spec: &TaskSpec,
    seasonality: usize,
    labeled: &Labeled,
    horizon_forecast: &[f64],
    opts: &BayesRidgeOptions,
) -> Result<(BayesRidgeModel, PseudoForecasts, f64)> {
    let data = build_stage1_training_set(y, &labeled.windows, &labeled.forecasts, spec, seasonality)?;
    let generator = fit_generator(&data, opts)?;
    let pseudo = generate_pseudo_forecasts(&generator, y, horizon_forecast, spec, seasonality)?;
    let quality = smape(&y[pseudo.valid_from - 1..], &pseudo.history, false)?;
    Ok((generator, pseudo, quality))
}

/// Runs Stage I only: window selection, `count` labeling calls, one horizon
/// call and the generator.
pub fn run_stage1<O: Oracle>(
    instance: &TimeSeriesInstance,
    spec: &TaskSpec,
    oracle: O,
    strategy: WindowStrategy,
    count: usize,
    opts: &BayesRidgeOptions,
) -> Result<Stage1Report> {
    validate_instance(instance, spec)?;
    let y = instance.target();
    let mut oracle = MeteredOracle::new(oracle);
    let labeled = label_windows(y, spec, &mut oracle, strategy, count, y.len())?;
    let horizon_forecast = call(&mut oracle, y, spec.horizon_len)?;
    let (generator, pseudo, pseudo_smape) = fit_stage1(y, spec, instance.seasonality(), &labeled, &horizon_forecast, opts)?;
    Ok(Stage1Report {
        windows: labeled.windows,
        window_fallback: labeled.window_fallback,
        generator,
        pseudo,
        pseudo_smape,
        oracle_calls: oracle.ledger().calls,
    })
}

/// One Stage-II row block for steps `t` with a per-step base value.
fn stage2_rows(
    instance: &TimeSeriesInstance,
    spec: &TaskSpec,
    lag_source: &[f64],
    steps: &[usize],
    base: impl Fn(usize) -> f64,
    with_targets: bool,
) -> Result<Stage2Rows> {
    let (l, p, s) = (spec.lag_count, spec.pos_dim, instance.seasonality());
    let d = instance.covariate_dim();
    let n = steps.len();
    let mut pseudo = Vec::with_capacity(n);
    let mut lags = Vec::with_capacity(n * l);
    let mut positions = Vec::with_capacity(n * p);
    let mut covariates = Vec::with_capacity(n * d);
    let mut targets = Vec::new();
    for &t in steps {
        pseudo.push(base(t));
        lags.extend_from_slice(lag_vector(lag_source, l, t)?);
        push_positional_encoding(&mut positions, t, s, p)?;
        covariates.extend_from_slice(instance.covariate_at(t));
        if with_targets {
            targets.push(instance.target()[t - 1]);
        }
    }
    Ok(Stage2Rows {
        pseudo,
        lags: Matrix::from_row_major(n, l, lags)?,
        positions: Matrix::from_row_major(n, p, positions)?,
        covariates: Matrix::from_row_major(n, d, covariates)?,
        targets,
    })
}

/// Adapts the oracle to the instance's covariates.
pub fn run_adapter<O: Oracle>(
    instance: &TimeSeriesInstance,
    spec: &TaskSpec,
    oracle: O,
    config: &AdapterConfig,
) -> Result<AdapterOutcome> {
    validate_instance(instance, spec)?;
    config.validate()?;
    let y = instance.target();
    let (hist, f) = (spec.history_len, spec.horizon_len);
    let mut oracle = MeteredOracle::new(oracle);

    let labeled = match config.direct_mode {
        Some(k) => label_windows(y, spec, &mut oracle, config.window_strategy, k, hist - f)?,
        None => label_windows(y, spec, &mut oracle, config.window_strategy, config.windows, hist)?,
    };
    let validation_oracle = call(&mut oracle, &y[..hist - f], f)?;
    let horizon_oracle = call(&mut oracle, y, f)?;

    if !(mean_std(y).1 > 0.0) {
        log::warn!("constant history; returning the oracle forecast unmodified");
        let result = ForecastResult {
            point: horizon_oracle.clone(),
            variance: vec![0.0; f],
            reverted_mask: vec![true; f],
            oracle_calls: oracle.ledger().calls,
        };
        return Ok(AdapterOutcome {
            result,
            oracle_forecast: horizon_oracle.clone(),
            gp_mean: horizon_oracle,
            windows: labeled.windows,
            window_fallback: labeled.window_fallback,
            degenerate: true,
            tuned: None,
            filter: None,
            pseudo_smape: None,
        });
    }

    let extended = extend_with_forecast(y, &horizon_oracle);
    let validation_steps: Vec<usize> = (hist - f + 1..=hist).collect();
    let horizon_steps: Vec<usize> = (hist + 1..=hist + f).collect();

    let (train, validation, horizon, pseudo_smape) = match config.direct_mode {
        None => {
            let (_, pseudo, quality) =
                fit_stage1(y, spec, instance.seasonality(), &labeled, &horizon_oracle, &config.generator)?;
            let train_steps: Vec<usize> = (spec.lag_count + 1..=hist - f).collect();
            let train = stage2_rows(instance, spec, y, &train_steps, |t| pseudo.at(t), true)?;
            let validation = stage2_rows(instance, spec, y, &validation_steps, |t| pseudo.at(t), true)?;
            let horizon = stage2_rows(instance, spec, &extended, &horizon_steps, |t| pseudo.horizon[t - hist - 1], false)?;
            (train, validation, horizon, Some(quality))
        }
        Some(_) => {
            let mut train: Option<Stage2Rows> = None;
            for (&start, forecast) in labeled.windows.starts.iter().zip(&labeled.forecasts) {
                let steps: Vec<usize> = (start..start + f).collect();
                let block = stage2_rows(instance, spec, y, &steps, |t| forecast[t - start], true)?;
                train = Some(match train {
                    None => block,
                    Some(acc) => acc.concat(&block),
                });
            }
            let train = train.expect("at least one window");
            let validation =
                stage2_rows(instance, spec, y, &validation_steps, |t| validation_oracle[t - (hist - f) - 1], true)?;
            let horizon = stage2_rows(instance, spec, &extended, &horizon_steps, |t| horizon_oracle[t - hist - 1], false)?;
            (train, validation, horizon, None)
        }
    };

    let tuned = tune_gp(&train, &validation, &config.search_space)?;
    let validation_truth = &y[hist - f..];
    let filter = tune_filter_threshold(
        &tuned.validation_variance,
        &tuned.validation_mean,
        &validation_oracle,
        validation_truth,
        &config.filter_grid,
    );

    let all = train.concat(&validation);
    let (x_all, split) = all.assemble(tuned.features);
    let model = GpModel::fit(&x_all, &all.targets, split, tuned.kernel, Scaling::fit(&x_all, &all.targets))?;
    let (x_horizon, _) = horizon.assemble(tuned.features);
    let (gp_mean, variance) = model.predict(&x_horizon)?;
    let (point, reverted_mask) = uncertainty_filter(&gp_mean, &variance, &horizon_oracle, filter.threshold);

    let result = ForecastResult { point, variance, reverted_mask, oracle_calls: oracle.ledger().calls };
    result.check(f)?;
    Ok(AdapterOutcome {
        result,
        oracle_forecast: horizon_oracle,
        gp_mean,
        windows: labeled.windows,
        window_fallback: labeled.window_fallback,
        degenerate: false,
        tuned: Some(tuned),
        filter: Some(filter),
        pseudo_smape,
    })
}
