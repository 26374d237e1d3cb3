//! Stage I: a Bayesian ridge imitation of the oracle, used to produce
//! oracle-like forecasts at every history step and over the horizon.

use alloc::vec::Vec;

use crate::bayes::{fit_bayes_ridge_or_constant, BayesRidgeModel, BayesRidgeOptions};
use crate::error::{bail, Result};
use crate::features::{lag_vector, push_positional_encoding, WindowChoice};
use crate::instance::TaskSpec;
use crate::linalg::Matrix;

/// Generator feature row `[value; lags; positions]`, dimension `1 + L + p`.
pub fn feature_row(value: f64, lags: &[f64], t: usize, seasonality: usize, pos_dim: usize) -> Result<Vec<f64>> {
    let mut row = Vec::with_capacity(1 + lags.len() + pos_dim);
    row.push(value);
    row.extend_from_slice(lags);
    push_positional_encoding(&mut row, t, seasonality, pos_dim)?;
    Ok(row)
}

/// Stage-I regression data: one row per step of each labeled window.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Data {
    pub inputs: Matrix,
    pub targets: Vec<f64>,
}

/// Builds the generator training set. `oracle_forecasts[i]` is the oracle
/// reply for the context ending just before `windows.starts[i]`.
pub fn build_stage1_training_set(
    series: &[f64],
    windows: &WindowChoice,
    oracle_forecasts: &[Vec<f64>],
    spec: &TaskSpec,
    seasonality: usize,
) -> Result<Stage1Data> {
    let f = windows.horizon;
    let lags = spec.lag_count;
    if oracle_forecasts.len() != windows.len() {
        bail!(Geometry, "{} oracle replies for {} windows", oracle_forecasts.len(), windows.len());
    }
    let mut rows = Vec::with_capacity(windows.len() * f);
    let mut targets = Vec::with_capacity(windows.len() * f);
    for (&start, forecast) in windows.starts.iter().zip(oracle_forecasts) {
        if forecast.len() != f {
            bail!(Geometry, "oracle reply has {} values, window has {}", forecast.len(), f);
        }
        if start <= lags || start + f - 1 > series.len() {
            bail!(Geometry, "window starting at {} is not inside [{}, {}]", start, lags + 1, series.len());
        }
        for (j, &target) in forecast.iter().enumerate() {
            let t = start + j;
            let lag = lag_vector(series, lags, t)?;
            rows.push(feature_row(series[t - 1], lag, t, seasonality, spec.pos_dim)?);
            targets.push(target);
        }
    }
    Ok(Stage1Data { inputs: Matrix::from_rows(&rows)?, targets })
}

pub fn fit_generator(data: &Stage1Data, opts: &BayesRidgeOptions) -> Result<BayesRidgeModel> {
    fit_bayes_ridge_or_constant(&data.inputs, &data.targets, opts)
}

/// Generator outputs over `[L+1, H]` and `[H+1, H+F]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoForecasts {
    /// `history[i]` is the pseudo-forecast at step `valid_from + i`.
    pub history: Vec<f64>,
    pub horizon: Vec<f64>,
    pub valid_from: usize,
}

impl PseudoForecasts {
    /// Pseudo-forecast at a 1-based history step `t >= valid_from`.
    pub fn at(&self, t: usize) -> f64 {
        self.history[t - self.valid_from]
    }
}

/// The series extended with the oracle horizon forecast: lags at horizon
/// steps read true values up to `H` and forecast values after it.
pub fn extend_with_forecast(series: &[f64], forecast: &[f64]) -> Vec<f64> {
    let mut ext = Vec::with_capacity(series.len() + forecast.len());
    ext.extend_from_slice(series);
    ext.extend_from_slice(forecast);
    ext
}

pub fn generate_pseudo_forecasts(
    model: &BayesRidgeModel,
    series: &[f64],
    oracle_horizon_forecast: &[f64],
    spec: &TaskSpec,
    seasonality: usize,
) -> Result<PseudoForecasts> {
    let h = series.len();
    let lags = spec.lag_count;
    if oracle_horizon_forecast.len() != spec.horizon_len {
        bail!(Geometry, "horizon forecast has {} values, expected {}", oracle_horizon_forecast.len(), spec.horizon_len);
    }
    if model.dim() != 1 + lags + spec.pos_dim {
        bail!(Geometry, "generator expects {} features, task has {}", model.dim(), 1 + lags + spec.pos_dim);
    }
    if h <= lags {
        bail!(Geometry, "history {} not longer than lag count {}", h, lags);
    }
    let mut history = Vec::with_capacity(h - lags);
    for t in lags + 1..=h {
        let row = feature_row(series[t - 1], lag_vector(series, lags, t)?, t, seasonality, spec.pos_dim)?;
        history.push(model.predict_one(&row));
    }
    let ext = extend_with_forecast(series, oracle_horizon_forecast);
    let mut horizon = Vec::with_capacity(oracle_horizon_forecast.len());
    for (j, &value) in oracle_horizon_forecast.iter().enumerate() {
        let t = h + 1 + j;
        let row = feature_row(value, lag_vector(&ext, lags, t)?, t, seasonality, spec.pos_dim)?;
        horizon.push(model.predict_one(&row));
    }
    if history.iter().chain(&horizon).any(|v| !v.is_finite()) {
        bail!(Numerical, "non-finite pseudo-forecast");
    }
    Ok(PseudoForecasts { history, horizon, valid_from: lags + 1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::WindowStrategy;
    use alloc::vec;

    fn spec(h: usize, f: usize, lags: usize) -> TaskSpec {
        TaskSpec { history_len: h, horizon_len: f, min_context: h / 2, lag_count: lags, pos_dim: 4, seed: 0 }
    }

    fn choice(starts: Vec<usize>, f: usize) -> WindowChoice {
        let k = starts.len();
        WindowChoice { starts, mean_zscores: vec![0.0; k], strategy: WindowStrategy::Latest, horizon: f }
    }

    #[test]
    fn training_set_shape_and_rows() {
        let y: Vec<f64> = (1..=200).map(|i| i as f64).collect();
        let sp = spec(200, 24, 5);
        let w = choice(vec![105, 129, 177], 24);
        let forecasts: Vec<Vec<f64>> = (0..3).map(|k| (0..24).map(|j| (100 * k + j) as f64).collect()).collect();
        let d = build_stage1_training_set(&y, &w, &forecasts, &sp, 24).unwrap();
        assert_eq!(d.inputs.rows(), 72);
        assert_eq!(d.inputs.cols(), 1 + 5 + 4);
        // first row of first window: value y_105, lags Y_{100..104}
        let r = d.inputs.row(0);
        assert_eq!(r[0], 105.0);
        assert_eq!(&r[1..6], &[100.0, 101.0, 102.0, 103.0, 104.0]);
        let flat: Vec<f64> = forecasts.concat();
        assert_eq!(d.targets, flat);
    }

    #[test]
    fn window_outside_lag_range() {
        let y = vec![1.0; 30];
        let sp = spec(30, 2, 5);
        let w = choice(vec![3], 2);
        assert!(build_stage1_training_set(&y, &w, &[vec![0.0, 0.0]], &sp, 4).is_err());
    }

    #[test]
    fn identity_generator_passes_values_through() {
        let y: Vec<f64> = (0..40).map(|i| (i as f64 * 0.7).sin() * 3.0 + 5.0).collect();
        let sp = spec(40, 4, 2);
        let mut w = vec![0.0; 1 + 2 + 4];
        w[0] = 1.0;
        let g = BayesRidgeModel::from_weights(w, 0.0);
        let fc = [9.0, 8.0, 7.0, 6.0];
        let p = generate_pseudo_forecasts(&g, &y, &fc, &sp, 7).unwrap();
        assert_eq!(p.valid_from, 3);
        assert_eq!(p.history, y[2..].to_vec());
        assert_eq!(p.horizon, fc.to_vec());
    }

    #[test]
    fn horizon_lags_mix_truth_and_forecast() {
        let y: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let fc = [100.0, 200.0];
        let ext = extend_with_forecast(&y, &fc);
        assert_eq!(lag_vector(&ext, 2, 11).unwrap(), &[9.0, 10.0]);
        assert_eq!(lag_vector(&ext, 2, 12).unwrap(), &[10.0, 100.0]);
        // a generator reading only the last lag exposes the boundary values
        let sp = spec(10, 2, 2);
        let mut w = vec![0.0; 1 + 2 + 4];
        w[2] = 1.0;
        let p = generate_pseudo_forecasts(&BayesRidgeModel::from_weights(w, 0.0), &y, &fc, &sp, 3).unwrap();
        assert_eq!(p.horizon, vec![10.0, 100.0]);
    }

    #[test]
    fn wrong_forecast_length() {
        let y = vec![1.0; 10];
        let g = BayesRidgeModel::from_weights(vec![0.0; 7], 0.0);
        assert!(generate_pseudo_forecasts(&g, &y, &[1.0], &spec(10, 2, 2), 3).is_err());
    }
}
