//! Forecasting instances and task geometry.
//!
//! Time indices in this crate are 1-based, matching the usual `Y_{1:H}`
//! notation: step `t` lives at `target[t - 1]`.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{bail, Error, Result};
use crate::linalg::Matrix;

/// One forecasting example: a univariate history plus covariates known over
/// history and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesInstance {
    target: Vec<f64>,
    covariates: Matrix,
    horizon_truth: Option<Vec<f64>>,
    frequency: String,
    seasonality: usize,
}

impl TimeSeriesInstance {
    /// Builds an instance. `covariates` must have exactly `target.len() +
    /// horizon` rows; it may have zero columns.
    pub fn new(
        target: Vec<f64>,
        covariates: Matrix,
        horizon: usize,
        horizon_truth: Option<Vec<f64>>,
        frequency: impl Into<String>,
        seasonality: usize,
    ) -> Result<Self> {
        let h = target.len();
        if h == 0 {
            bail!(Geometry, "empty target history");
        }
        if horizon == 0 {
            bail!(Geometry, "horizon must be at least 1");
        }
        if covariates.rows() != h + horizon {
            bail!(
                Geometry,
                "covariates have {} rows, expected history + horizon = {}",
                covariates.rows(),
                h + horizon
            );
        }
        if let Some(truth) = &horizon_truth {
            if truth.len() != horizon {
                bail!(Geometry, "horizon truth has {} values, expected {}", truth.len(), horizon);
            }
        }
        if seasonality == 0 || seasonality > h {
            bail!(Config, "seasonality {} must be in [1, {}]", seasonality, h);
        }
        if let Some(i) = target.iter().position(|v| !v.is_finite()) {
            bail!(Data, "non-finite target value at step {}", i + 1);
        }
        if let Some(i) = covariates.as_slice().iter().position(|v| !v.is_finite()) {
            let cols = covariates.cols().max(1);
            bail!(Data, "non-finite covariate at row {}, column {}", i / cols + 1, i % cols + 1);
        }
        if let Some(truth) = &horizon_truth {
            if let Some(i) = truth.iter().position(|v| !v.is_finite()) {
                bail!(Data, "non-finite horizon truth at step {}", i + 1);
            }
        }
        Ok(Self { target, covariates, horizon_truth, frequency: frequency.into(), seasonality })
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn covariates(&self) -> &Matrix {
        &self.covariates
    }

    pub fn horizon_truth(&self) -> Option<&[f64]> {
        self.horizon_truth.as_deref()
    }

    pub fn frequency(&self) -> &str {
        &self.frequency
    }

    pub fn seasonality(&self) -> usize {
        self.seasonality
    }

    pub fn history_len(&self) -> usize {
        self.target.len()
    }

    pub fn horizon_len(&self) -> usize {
        self.covariates.rows() - self.target.len()
    }

    pub fn covariate_dim(&self) -> usize {
        self.covariates.cols()
    }

    /// Covariate row for 1-based step `t` in `1..=H+F`.
    pub fn covariate_at(&self, t: usize) -> &[f64] {
        self.covariates.row(t - 1)
    }
}

/// Geometry of the adaptation task.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TaskSpec {
    pub history_len: usize,
    pub horizon_len: usize,
    pub min_context: usize,
    pub lag_count: usize,
    pub pos_dim: usize,
    pub seed: u64,
}

pub const DEFAULT_POS_DIM: usize = 8;

impl TaskSpec {
    pub fn new(
        history_len: usize,
        horizon_len: usize,
        min_context: usize,
        lag_count: usize,
        pos_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        let spec = Self { history_len, horizon_len, min_context, lag_count, pos_dim, seed };
        spec.check()?;
        Ok(spec)
    }

    /// Task with the default minimum context, one season of lags and an
    /// 8-dimensional positional encoding.
    pub fn with_defaults(history_len: usize, horizon_len: usize, seasonality: usize, seed: u64) -> Result<Self> {
        let min_context = default_min_context(history_len, horizon_len, seasonality);
        let lag_count = default_lag_count(seasonality, min_context);
        Self::new(history_len, horizon_len, min_context, lag_count, DEFAULT_POS_DIM, seed)
    }

    fn check(&self) -> Result<()> {
        let (hist, f, h) = (self.history_len, self.horizon_len, self.min_context);
        if f == 0 {
            bail!(Geometry, "horizon must be at least 1");
        }
        if h == 0 || h >= hist {
            bail!(Geometry, "min_context {} must be in [1, history {})", h, hist);
        }
        if hist - h < 3 * f {
            bail!(
                Geometry,
                "history {} minus min_context {} leaves fewer than 3 windows of {}",
                hist,
                h,
                f
            );
        }
        if self.lag_count == 0 || self.lag_count >= h {
            bail!(Config, "lag count {} must be in [1, min_context {})", self.lag_count, h);
        }
        if self.pos_dim < 2 || self.pos_dim % 2 != 0 {
            bail!(Config, "positional encoding size {} must be even and at least 2", self.pos_dim);
        }
        Ok(())
    }

    /// Number of anchored windows of length F that fit in `(h, H]`.
    pub fn window_count(&self) -> usize {
        (self.history_len - self.min_context) / self.horizon_len
    }
}

/// `max(2s, H/2)` rounded down to a multiple of F, pulled below `H - 3F`
/// when that bound is violated.
pub fn default_min_context(history_len: usize, horizon_len: usize, seasonality: usize) -> usize {
    let f = horizon_len.max(1);
    let mut h = (2 * seasonality).max(history_len / 2);
    if h >= f {
        h = h / f * f;
    }
    let limit = history_len.saturating_sub(3 * f);
    if h > limit {
        h = limit / f * f;
        if h == 0 {
            h = limit;
        }
    }
    h
}

pub fn default_lag_count(seasonality: usize, min_context: usize) -> usize {
    seasonality.min(min_context.saturating_sub(1)).max(1)
}

/// Checks that an instance matches a task.
pub fn validate_instance(instance: &TimeSeriesInstance, spec: &TaskSpec) -> Result<()> {
    spec.check()?;
    if instance.history_len() != spec.history_len {
        bail!(
            Geometry,
            "instance history {} does not match task history {}",
            instance.history_len(),
            spec.history_len
        );
    }
    if instance.horizon_len() != spec.horizon_len {
        bail!(
            Geometry,
            "instance horizon {} does not match task horizon {}",
            instance.horizon_len(),
            spec.horizon_len
        );
    }
    Ok(())
}

/// Final adapted forecast.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastResult {
    pub point: Vec<f64>,
    /// Posterior predictive variance on the original target scale.
    pub variance: Vec<f64>,
    pub reverted_mask: Vec<bool>,
    pub oracle_calls: usize,
}

impl ForecastResult {
    pub fn reverted_count(&self) -> usize {
        self.reverted_mask.iter().filter(|r| **r).count()
    }

    pub(crate) fn check(&self, horizon: usize) -> Result<()> {
        if self.point.len() != horizon || self.variance.len() != horizon || self.reverted_mask.len() != horizon {
            return Err(Error::Geometry("forecast result length mismatch".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn instance(h: usize, f: usize, d: usize) -> TimeSeriesInstance {
        let target = (0..h).map(|i| i as f64).collect();
        TimeSeriesInstance::new(target, Matrix::zeros(h + f, d), f, None, "1H", 24.min(h)).unwrap()
    }

    #[test]
    fn epf_geometry_is_valid() {
        let spec = TaskSpec::new(672, 24, 336, 24, 8, 0).unwrap();
        validate_instance(&instance(672, 24, 2), &spec).unwrap();
        assert_eq!(default_min_context(672, 24, 24), 336);
        assert_eq!(TaskSpec::with_defaults(672, 24, 24, 0).unwrap(), spec);
    }

    #[test]
    fn horizon_exceeding_headroom_is_geometry_error() {
        assert!(matches!(TaskSpec::new(10, 24, 5, 2, 8, 0), Err(Error::Geometry(_))));
        assert!(matches!(TaskSpec::with_defaults(10, 24, 2, 0), Err(Error::Geometry(_))));
    }

    #[test]
    fn covariate_row_mismatch_is_geometry_error() {
        let r = TimeSeriesInstance::new(vec![1.0; 5], Matrix::zeros(5, 1), 1, None, "1H", 1);
        assert!(matches!(r, Err(Error::Geometry(_))));
    }

    #[test]
    fn non_finite_values_rejected() {
        let r = TimeSeriesInstance::new(vec![1.0, f64::NAN], Matrix::zeros(3, 0), 1, None, "1H", 1);
        assert!(matches!(r, Err(Error::Data(_))));
        let mut cov = Matrix::zeros(3, 1);
        cov[(2, 0)] = f64::INFINITY;
        let r = TimeSeriesInstance::new(vec![1.0, 2.0], cov, 1, None, "1H", 1);
        assert!(matches!(r, Err(Error::Data(_))));
    }

    #[test]
    fn config_errors() {
        assert!(matches!(TaskSpec::new(672, 24, 336, 336, 8, 0), Err(Error::Config(_))));
        assert!(matches!(TaskSpec::new(672, 24, 336, 24, 7, 0), Err(Error::Config(_))));
        assert!(matches!(TaskSpec::new(672, 24, 336, 24, 0, 0), Err(Error::Config(_))));
    }

    #[test]
    fn mismatched_instance_and_task() {
        let spec = TaskSpec::new(672, 24, 336, 24, 8, 0).unwrap();
        assert!(matches!(validate_instance(&instance(600, 24, 1), &spec), Err(Error::Geometry(_))));
        assert!(matches!(validate_instance(&instance(672, 12, 1), &spec), Err(Error::Geometry(_))));
    }

    #[test]
    fn default_lags_capped() {
        assert_eq!(default_lag_count(24, 336), 24);
        assert_eq!(default_lag_count(24, 10), 9);
    }
}
