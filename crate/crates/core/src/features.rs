//! Lag features, sinusoidal positions and representative-window selection.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{bail, Error, Result};
use crate::instance::TaskSpec;
use crate::math::{cos, mean_std, sin};

/// Lag vectors `Y_{t-L..t-1}` for each 1-based `t` in `t_range`.
pub fn lag_matrix(series: &[f64], lags: usize, t_range: core::ops::RangeInclusive<usize>) -> Result<Vec<Vec<f64>>> {
    t_range.map(|t| lag_vector(series, lags, t).map(<[f64]>::to_vec)).collect()
}

/// Lag vector for a single 1-based step, borrowed from the series.
pub fn lag_vector(series: &[f64], lags: usize, t: usize) -> Result<&[f64]> {
    if t <= lags {
        bail!(Geometry, "step {} has fewer than {} predecessors", t, lags);
    }
    if t - 1 > series.len() {
        bail!(Geometry, "step {} is past the end of a series of length {}", t, series.len());
    }
    Ok(&series[t - 1 - lags..t - 1])
}

/// `[sin(2πkφ), cos(2πkφ)]` for `k = 1..=p/2` with `φ = (t mod s) / s`.
pub fn positional_encoding(t: usize, seasonality: usize, pos_dim: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(pos_dim);
    push_positional_encoding(&mut out, t, seasonality, pos_dim)?;
    Ok(out)
}

pub(crate) fn push_positional_encoding(out: &mut Vec<f64>, t: usize, seasonality: usize, pos_dim: usize) -> Result<()> {
    if pos_dim % 2 != 0 {
        bail!(Config, "positional encoding size {} is odd", pos_dim);
    }
    if seasonality == 0 {
        bail!(Config, "seasonality must be at least 1");
    }
    let phase = (t % seasonality) as f64 / seasonality as f64;
    for k in 1..=pos_dim / 2 {
        let angle = 2.0 * PI * k as f64 * phase;
        out.push(sin(angle));
        out.push(cos(angle));
    }
    Ok(())
}

/// How Stage-I picks the windows it sends to the oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WindowStrategy {
    /// Spread over the ranking of mean z-scores (lowest, median, highest for three).
    ZScore,
    /// The most recent windows.
    Latest,
    /// Uniform without replacement under the task seed.
    Random,
}

impl WindowStrategy {
    pub const ALL: [WindowStrategy; 3] = [WindowStrategy::ZScore, WindowStrategy::Latest, WindowStrategy::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            WindowStrategy::ZScore => "zscore",
            WindowStrategy::Latest => "latest",
            WindowStrategy::Random => "random",
        }
    }
}

impl fmt::Display for WindowStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WindowStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zscore" | "z-score" => Ok(WindowStrategy::ZScore),
            "latest" => Ok(WindowStrategy::Latest),
            "random" => Ok(WindowStrategy::Random),
            other => Err(Error::Config(alloc::format!("unknown window strategy '{other}'"))),
        }
    }
}

/// Selected windows. `starts` holds the 1-based first step `h_i + 1` of each
/// window; the oracle context for a window is `Y_{1:start-1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowChoice {
    pub starts: Vec<usize>,
    /// Mean z-score of each selected window, parallel to `starts`. Zero when
    /// the history has no spread.
    pub mean_zscores: Vec<f64>,
    pub strategy: WindowStrategy,
    pub horizon: usize,
}

impl WindowChoice {
    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }
}

/// Selects `count` windows from the partition of `(h, H]`.
pub fn select_windows(
    series: &[f64],
    spec: &TaskSpec,
    strategy: WindowStrategy,
    count: usize,
    seed: u64,
) -> Result<WindowChoice> {
    select_windows_before(series, spec.min_context, series.len(), spec.horizon_len, strategy, count, seed)
}

/// Same as [`select_windows`], restricted to windows ending at or before
/// `end`. Windows are anchored at `end`; the remainder of `(end - h) / F`
/// is dropped at the oldest side. Z-scores always use the statistics of the
/// whole series.
pub fn select_windows_before(
    series: &[f64],
    min_context: usize,
    end: usize,
    horizon: usize,
    strategy: WindowStrategy,
    count: usize,
    seed: u64,
) -> Result<WindowChoice> {
    if horizon == 0 || count == 0 {
        bail!(Geometry, "horizon and window count must be positive");
    }
    if end > series.len() || end <= min_context {
        bail!(Geometry, "window region ({}, {}] is empty or outside the series", min_context, end);
    }
    let n = (end - min_context) / horizon;
    if n < count {
        bail!(Geometry, "only {} windows of length {} fit in ({}, {}], need {}", n, horizon, min_context, end, count);
    }
    let first = end - n * horizon + 1;
    let all_starts: Vec<usize> = (0..n).map(|i| first + i * horizon).collect();

    let (mu, sigma) = mean_std(series);
    let zbar = |start: usize| -> f64 {
        if sigma > 0.0 {
            let w = &series[start - 1..start - 1 + horizon];
            w.iter().map(|v| (v - mu) / sigma).sum::<f64>() / horizon as f64
        } else {
            0.0
        }
    };

    let starts: Vec<usize> = match strategy {
        WindowStrategy::ZScore => {
            if !(sigma > 0.0) {
                bail!(Degenerate, "history has zero standard deviation; z-score selection undefined");
            }
            let mut ranked: Vec<(f64, usize)> = all_starts.iter().map(|&s| (zbar(s), s)).collect();
            ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            spread_indices(n, count).into_iter().map(|i| ranked[i].1).collect()
        }
        WindowStrategy::Latest => all_starts[n - count..].to_vec(),
        WindowStrategy::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked: Vec<usize> =
                rand::seq::index::sample(&mut rng, n, count).into_iter().map(|i| all_starts[i]).collect();
            picked.sort_unstable();
            picked
        }
    };
    let mean_zscores = starts.iter().map(|&s| zbar(s)).collect();
    Ok(WindowChoice { starts, mean_zscores, strategy, horizon })
}

/// Distinct positions spread evenly over `0..n`: for three picks this is
/// first, lower median, last.
fn spread_indices(n: usize, count: usize) -> Vec<usize> {
    if count == 1 {
        return alloc::vec![n.div_ceil(2) - 1];
    }
    (0..count).map(|i| i * (n - 1) / (count - 1)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn lag_rows() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(lag_vector(&s, 2, 3).unwrap(), &[1.0, 2.0]);
        assert!(matches!(lag_vector(&s, 2, 2), Err(Error::Geometry(_))));
        assert_eq!(lag_vector(&s, 1, 4).unwrap(), &[3.0]);
        assert_eq!(lag_matrix(&s, 2, 3..=5).unwrap(), vec![vec![1.0, 2.0], vec![2.0, 3.0], vec![3.0, 4.0]]);
        assert!(lag_matrix(&s, 2, 3..=6).is_err());
    }

    #[test]
    fn positions() {
        assert_eq!(positional_encoding(0, 5, 4).unwrap(), vec![0.0, 1.0, 0.0, 1.0]);
        assert_eq!(positional_encoding(10, 5, 4).unwrap(), vec![0.0, 1.0, 0.0, 1.0]);
        let p = positional_encoding(1, 4, 2).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1].abs() < 1e-15);
        assert!(matches!(positional_encoding(1, 4, 3), Err(Error::Config(_))));
        for t in 0..50 {
            assert_eq!(positional_encoding(t, 7, 8).unwrap(), positional_encoding(t + 7, 7, 8).unwrap());
        }
    }

    fn small_spec() -> TaskSpec {
        TaskSpec { history_len: 8, horizon_len: 2, min_context: 2, lag_count: 1, pos_dim: 2, seed: 0 }
    }

    const Y: [f64; 8] = [0.0, 0.0, 1.0, 1.0, 5.0, 5.0, 3.0, 3.0];

    /// Brute force: every window's mean z-score from first principles.
    fn brute_zbars(series: &[f64], starts: &[usize], f: usize) -> Vec<f64> {
        let n = series.len() as f64;
        let mu = series.iter().sum::<f64>() / n;
        let var = series.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        starts
            .iter()
            .map(|&s| (s..s + f).map(|t| (series[t - 1] - mu) / sd).sum::<f64>() / f as f64)
            .collect()
    }

    #[test]
    fn zscore_selection_small_case() {
        let z = brute_zbars(&Y, &[3, 5, 7], 2);
        assert!((z[0] + 0.651).abs() < 1e-3 && (z[1] - 1.432).abs() < 1e-3 && (z[2] - 0.390).abs() < 1e-3);
        let c = select_windows(&Y, &small_spec(), WindowStrategy::ZScore, 3, 0).unwrap();
        assert_eq!(c.starts, vec![3, 7, 5]);
        for (got, want) in c.mean_zscores.iter().zip([z[0], z[2], z[1]]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn latest_selection() {
        let c = select_windows(&Y, &small_spec(), WindowStrategy::Latest, 3, 0).unwrap();
        assert_eq!(c.starts, vec![3, 5, 7]);
    }

    #[test]
    fn constant_series_is_degenerate() {
        let y = [2.0; 8];
        let r = select_windows(&y, &small_spec(), WindowStrategy::ZScore, 3, 0);
        assert!(matches!(r, Err(Error::Degenerate(_))));
        assert!(select_windows(&y, &small_spec(), WindowStrategy::Latest, 3, 0).is_ok());
    }

    #[test]
    fn remainder_dropped_at_oldest_end() {
        // (9 - 2) / 2 = 3 windows, anchored at 9: starts 4, 6, 8.
        let y = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let c = select_windows_before(&y, 2, 9, 2, WindowStrategy::Latest, 3, 0).unwrap();
        assert_eq!(c.starts, vec![4, 6, 8]);
        assert!(select_windows_before(&y, 2, 9, 2, WindowStrategy::Latest, 4, 0).is_err());
    }

    #[test]
    fn lower_median_for_even_count() {
        assert_eq!(spread_indices(4, 3), vec![0, 1, 3]);
        assert_eq!(spread_indices(7, 3), vec![0, 3, 6]);
        assert_eq!(spread_indices(4, 1), vec![1]);
        assert_eq!(spread_indices(8, 8), (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn ties_break_by_earlier_start() {
        let y = [0.0, 0.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 9.0, 9.0];
        let spec = TaskSpec { history_len: 10, horizon_len: 2, min_context: 2, lag_count: 1, pos_dim: 2, seed: 0 };
        let c = select_windows(&y, &spec, WindowStrategy::ZScore, 3, 0).unwrap();
        // starts 3,5,7 tie; lower median of 4 ranked windows is index 1 -> start 5.
        assert_eq!(c.starts, vec![3, 5, 9]);
    }

    #[test]
    fn random_is_reproducible() {
        let y: Vec<f64> = (0..100).map(|i| (i as f64 * 0.3).sin()).collect();
        let spec = TaskSpec { history_len: 100, horizon_len: 5, min_context: 20, lag_count: 4, pos_dim: 2, seed: 0 };
        let a = select_windows(&y, &spec, WindowStrategy::Random, 3, 42).unwrap();
        let b = select_windows(&y, &spec, WindowStrategy::Random, 3, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }
}
