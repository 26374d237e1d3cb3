//! Point-forecast error metrics.

use crate::error::{bail, Result};
use crate::math::{abs, sqrt};

fn check(truth: &[f64], pred: &[f64]) -> Result<()> {
    if truth.is_empty() || truth.len() != pred.len() {
        bail!(Geometry, "metric inputs must be non-empty and equal length ({} vs {})", truth.len(), pred.len());
    }
    Ok(())
}

pub fn mae(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check(truth, pred)?;
    Ok(truth.iter().zip(pred).map(|(y, p)| abs(y - p)).sum::<f64>() / truth.len() as f64)
}

pub fn rmse(truth: &[f64], pred: &[f64]) -> Result<f64> {
    check(truth, pred)?;
    let mse = truth.iter().zip(pred).map(|(y, p)| (y - p) * (y - p)).sum::<f64>() / truth.len() as f64;
    Ok(sqrt(mse))
}

/// `2/F Σ |y - ŷ| / (|y| + |ŷ|)`, with `0/0` terms counted as 0. With
/// `exclude_zero_truth`, steps where `y = 0` leave both sum and count.
pub fn smape(truth: &[f64], pred: &[f64], exclude_zero_truth: bool) -> Result<f64> {
    check(truth, pred)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for (y, p) in truth.iter().zip(pred) {
        if exclude_zero_truth && *y == 0.0 {
            continue;
        }
        let denom = abs(*y) + abs(*p);
        if denom > 0.0 {
            total += abs(y - p) / denom;
        }
        count += 1;
    }
    if count == 0 {
        bail!(Degenerate, "every step has zero truth");
    }
    Ok(2.0 * total / count as f64)
}

/// MAE scaled by the in-sample seasonal-naive MAE `mean |y_t - y_{t-s}|`
/// over the history.
pub fn mase(truth: &[f64], pred: &[f64], history: &[f64], seasonality: usize) -> Result<f64> {
    check(truth, pred)?;
    if seasonality == 0 || history.len() <= seasonality {
        bail!(Geometry, "history of {} too short for seasonality {}", history.len(), seasonality);
    }
    let diffs = history.len() - seasonality;
    let scale = (seasonality..history.len()).map(|t| abs(history[t] - history[t - seasonality])).sum::<f64>() / diffs as f64;
    if !(scale > 0.0) {
        bail!(Degenerate, "seasonal-naive scale is zero");
    }
    Ok(mae(truth, pred)? / scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn mae_rmse_examples() {
        assert_eq!(mae(&[1.0, 1.0], &[1.0, 3.0]).unwrap(), 1.0);
        assert_eq!(rmse(&[1.0, 1.0], &[1.0, 3.0]).unwrap(), 2f64.sqrt());
        assert_eq!(mae(&[2.0], &[5.0]).unwrap(), 3.0);
        assert_eq!(rmse(&[2.0], &[5.0]).unwrap(), 3.0);
        assert_eq!(mae(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
        assert!(matches!(mae(&[1.0], &[1.0, 2.0]), Err(Error::Geometry(_))));
        assert!(matches!(rmse(&[], &[]), Err(Error::Geometry(_))));
    }

    #[test]
    fn smape_examples() {
        assert_eq!(smape(&[1.0, 1.0], &[1.0, 3.0], false).unwrap(), 0.5);
        assert_eq!(smape(&[0.0], &[0.0], false).unwrap(), 0.0);
        assert_eq!(smape(&[0.0, 2.0], &[1.0, 2.0], true).unwrap(), 0.0);
        assert_eq!(smape(&[0.0, 2.0], &[1.0, 2.0], false).unwrap(), 1.0);
        assert!(matches!(smape(&[0.0, 0.0], &[1.0, 2.0], true), Err(Error::Degenerate(_))));
    }

    #[test]
    fn mase_examples() {
        assert!(matches!(mase(&[1.0], &[2.0], &[1.0, 2.0, 1.0, 2.0], 2), Err(Error::Degenerate(_))));
        assert_eq!(mase(&[1.0], &[2.0], &[1.0, 2.0, 1.0, 3.0], 2).unwrap(), 2.0);
        assert_eq!(mase(&[1.0, 2.0], &[1.0, 2.0], &[1.0, 2.0, 1.0, 3.0], 2).unwrap(), 0.0);
        assert!(matches!(mase(&[1.0], &[1.0], &[1.0, 2.0], 2), Err(Error::Geometry(_))));
    }
}
