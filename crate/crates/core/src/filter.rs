//! Uncertainty-based reversion to the oracle forecast.

use alloc::vec::Vec;

use crate::math::abs;

/// One entry of the threshold grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterCandidate {
    /// Threshold at this quantile of the validation variances, in `(0, 1]`.
    Quantile(f64),
    /// Never revert.
    Off,
}

pub fn default_filter_grid() -> Vec<FilterCandidate> {
    alloc::vec![
        FilterCandidate::Quantile(0.8),
        FilterCandidate::Quantile(0.9),
        FilterCandidate::Quantile(0.95),
        FilterCandidate::Off,
    ]
}

/// Replaces steps whose variance exceeds `threshold` with the oracle value.
pub fn uncertainty_filter(
    gp_mean: &[f64],
    gp_variance: &[f64],
    oracle_forecast: &[f64],
    threshold: f64,
) -> (Vec<f64>, Vec<bool>) {
    assert!(
        gp_mean.len() == gp_variance.len() && gp_mean.len() == oracle_forecast.len(),
        "filter inputs must have equal lengths"
    );
    let mask: Vec<bool> = gp_variance.iter().map(|v| *v > threshold).collect();
    let point = gp_mean
        .iter()
        .zip(oracle_forecast)
        .zip(&mask)
        .map(|((g, o), revert)| if *revert { *o } else { *g })
        .collect();
    (point, mask)
}

/// Linear-interpolation quantile (type 7) of unsorted values.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos as usize;
    let hi = (lo + 1).min(v.len() - 1);
    let frac = pos - lo as f64;
    v[lo] + (v[hi] - v[lo]) * frac
}

/// Chosen threshold and the grid entry it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterChoice {
    pub threshold: f64,
    pub candidate: FilterCandidate,
    pub validation_mae: f64,
}

/// Picks the grid entry whose filtered validation forecast has the lowest
/// MAE; ties go to the larger threshold.
pub fn tune_filter_threshold(
    validation_variance: &[f64],
    validation_mean: &[f64],
    validation_oracle: &[f64],
    validation_truth: &[f64],
    grid: &[FilterCandidate],
) -> FilterChoice {
    assert!(!validation_variance.is_empty(), "empty validation window");
    let mut best: Option<FilterChoice> = None;
    let candidates = grid.iter().copied().chain(core::iter::once(FilterCandidate::Off));
    for candidate in candidates {
        let threshold = match candidate {
            FilterCandidate::Quantile(q) => quantile(validation_variance, q),
            FilterCandidate::Off => f64::INFINITY,
        };
        let (point, _) = uncertainty_filter(validation_mean, validation_variance, validation_oracle, threshold);
        let mae = point.iter().zip(validation_truth).map(|(p, t)| abs(p - t)).sum::<f64>() / point.len() as f64;
        let better = match &best {
            None => true,
            Some(b) => mae < b.validation_mae || (mae == b.validation_mae && threshold > b.threshold),
        };
        if better {
            best = Some(FilterChoice { threshold, candidate, validation_mae: mae });
        }
    }
    best.expect("grid always contains off")
}
