use covadapt_core::{
    lag_vector, mae, positional_encoding, quantile, rmse, select_windows, smape, uncertainty_filter, TaskSpec,
    WindowStrategy,
};
use proptest::prelude::*;

fn pair(max_len: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1..max_len).prop_flat_map(|n| (prop::collection::vec(-1e3..1e3f64, n), prop::collection::vec(-1e3..1e3f64, n)))
}

fn mean_z(series: &[f64], start: usize, f: usize) -> f64 {
    let n = series.len() as f64;
    let mu = series.iter().sum::<f64>() / n;
    let sd = (series.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n).sqrt();
    series[start - 1..start - 1 + f].iter().map(|v| (v - mu) / sd).sum::<f64>() / f as f64
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn metric_bounds((truth, pred) in pair(40)) {
        let s = smape(&truth, &pred, false).unwrap();
        prop_assert!((0.0..=2.0).contains(&s));
        let (a, r) = (mae(&truth, &pred).unwrap(), rmse(&truth, &pred).unwrap());
        prop_assert!(a <= r * (1.0 + 1e-12));
        prop_assert!(a >= 0.0);
    }
}

proptest! {
    #[test]
    fn metrics_vanish_only_on_exact_match((truth, pred) in pair(20)) {
        prop_assert_eq!(mae(&truth, &truth).unwrap(), 0.0);
        prop_assert_eq!(smape(&truth, &truth, false).unwrap(), 0.0);
        if truth != pred {
            prop_assert!(mae(&truth, &pred).unwrap() > 0.0);
            prop_assert!(smape(&truth, &pred, false).unwrap() > 0.0);
        }
    }

    #[test]
    fn zscore_windows_invariant_under_positive_affine_maps(
        series in prop::collection::vec(-50.0..50.0f64, 60..120),
        scale in 0.01..100.0f64,
        shift in -1e3..1e3f64,
        count in 1usize..5,
    ) {
        let f = 6;
        let h = series.len() / 3;
        let n = (series.len() - h) / f;
        prop_assume!(n >= count);
        let spec = TaskSpec::new(series.len(), f, h, 2, 2, 0).unwrap();
        let first = series.len() - n * f + 1;
        let mut z: Vec<f64> = (0..n).map(|i| mean_z(&series, first + i * f, f)).collect();
        z.sort_by(f64::total_cmp);
        prop_assume!(z.windows(2).all(|w| w[1] - w[0] > 1e-6));

        let mapped: Vec<f64> = series.iter().map(|v| scale * v + shift).collect();
        let a = select_windows(&series, &spec, WindowStrategy::ZScore, count, 0).unwrap();
        let b = select_windows(&mapped, &spec, WindowStrategy::ZScore, count, 0).unwrap();
        prop_assert_eq!(a.starts, b.starts);
    }

    #[test]
    fn selected_windows_lie_on_the_partition(
        len in 40usize..200,
        f in 1usize..10,
        count in 1usize..6,
        seed in any::<u64>(),
        strategy in prop::sample::select(WindowStrategy::ALL.to_vec()),
    ) {
        let h = len / 2;
        let n = (len - h) / f;
        prop_assume!(n >= count.max(3));
        let series: Vec<f64> = (0..len).map(|i| ((i * 37 % 11) as f64).sin()).collect();
        let spec = TaskSpec::new(len, f, h, 1, 2, seed).unwrap();
        let choice = select_windows(&series, &spec, strategy, count, seed).unwrap();
        prop_assert_eq!(choice.len(), count);
        let mut starts = choice.starts.clone();
        starts.sort_unstable();
        starts.dedup();
        prop_assert_eq!(starts.len(), count);
        for s in &choice.starts {
            prop_assert!(*s > h && s + f - 1 <= len);
            prop_assert_eq!((len + 1 - s) % f, 0);
        }
        let again = select_windows(&series, &spec, strategy, count, seed).unwrap();
        prop_assert_eq!(choice, again);
    }

    #[test]
    fn positional_encoding_is_periodic_and_unit(t in 0usize..10_000, s in 1usize..200, half in 1usize..6) {
        let a = positional_encoding(t, s, 2 * half).unwrap();
        let b = positional_encoding(t + s, s, 2 * half).unwrap();
        prop_assert_eq!(&a, &b);
        for pair in a.chunks(2) {
            prop_assert!((pair[0] * pair[0] + pair[1] * pair[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lag_vector_is_the_preceding_block(series in prop::collection::vec(-10.0..10.0f64, 2..60), lags in 1usize..10) {
        prop_assume!(lags < series.len());
        for t in lags + 1..=series.len() + 1 {
            let v = lag_vector(&series, lags, t).unwrap();
            prop_assert_eq!(v.len(), lags);
            for (i, x) in v.iter().enumerate() {
                prop_assert_eq!(*x, series[t - 1 - lags + i]);
            }
        }
        prop_assert!(lag_vector(&series, lags, lags).is_err());
    }

    #[test]
    fn filter_mask_matches_threshold(
        var in prop::collection::vec(0.0..10.0f64, 1..30),
        lo in 0.0..10.0f64,
        hi in 0.0..10.0f64,
    ) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let mean: Vec<f64> = (0..var.len()).map(|i| i as f64).collect();
        let oracle: Vec<f64> = (0..var.len()).map(|i| -(i as f64) - 1.0).collect();
        let (p_lo, m_lo) = uncertainty_filter(&mean, &var, &oracle, lo);
        let (_, m_hi) = uncertainty_filter(&mean, &var, &oracle, hi);
        for i in 0..var.len() {
            prop_assert_eq!(m_lo[i], var[i] > lo);
            prop_assert_eq!(p_lo[i], if m_lo[i] { oracle[i] } else { mean[i] });
            prop_assert!(!m_hi[i] || m_lo[i]);
        }
    }

    #[test]
    fn quantile_is_monotone_and_bounded(values in prop::collection::vec(-1e3..1e3f64, 1..50), a in 0.0..=1.0f64, b in 0.0..=1.0f64) {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (qa, qb) = (quantile(&values, a), quantile(&values, b));
        prop_assert!(qa <= qb + 1e-9);
        prop_assert!(qa >= min - 1e-9 && qb <= max + 1e-9);
        prop_assert_eq!(quantile(&values, 1.0), max);
        prop_assert_eq!(quantile(&values, 0.0), min);
    }
}
