use covadapt::eval::{records_from_csv, records_to_csv, run_benchmark, Experiment, MetricRecord, Method, Settings};
use covadapt::ingest::{load_csv, DatasetConfig, TaskSection};
use covadapt::remote::OracleSelector;
use covadapt::synthetic::{gen_synthetic, SyntheticSpec};
use covadapt_core::{AdapterConfig, SearchSpace};

fn experiment(dir: &std::path::Path) -> Experiment {
    let spec = SyntheticSpec { length: 150, seasonality: 6, seed: 2, ..SyntheticSpec::default() };
    let path = dir.join("synth.csv");
    gen_synthetic(&spec).unwrap().write_csv(&path).unwrap();
    let dataset = DatasetConfig {
        path,
        target: "y".into(),
        covariates: vec!["x".into()],
        frequency: "1H".into(),
        seasonality: 6,
        history_len: 120,
        horizon_len: 6,
        num_test_windows: 2,
    };
    Experiment::new(load_csv(&dataset).unwrap(), dataset, TaskSection::default(), 3)
}

fn settings(oracle: OracleSelector) -> Settings {
    Settings::new(oracle, AdapterConfig { search_space: SearchSpace::compact(), ..AdapterConfig::default() })
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[test]
fn counts_aggregates_and_gain_recomputed() {
    let dir = tempfile::tempdir().unwrap();
    let exp = experiment(dir.path());
    let report = run_benchmark(&[exp], &[Method::Adapter, Method::Oracle], &settings(OracleSelector::SeasonalNaive)).unwrap();
    assert_eq!(report.records.len(), 4);
    assert_eq!(report.aggregates.len(), 2);
    assert_eq!(report.gains.len(), 1);

    for agg in &report.aggregates {
        let rows: Vec<_> = report.records.iter().filter(|r| r.method == agg.method).collect();
        assert_eq!(agg.windows, rows.len());
        let pick = |f: fn(&MetricRecord) -> Option<f64>| rows.iter().map(|r| f(r).unwrap()).collect::<Vec<_>>();
        assert!((agg.mae.unwrap() - mean(&pick(|r| r.mae))).abs() < 1e-15);
        assert!((agg.rmse.unwrap() - mean(&pick(|r| r.rmse))).abs() < 1e-15);
        assert!((agg.smape.unwrap() - mean(&pick(|r| r.smape))).abs() < 1e-15);
        assert!((agg.mase.unwrap() - mean(&pick(|r| r.mase))).abs() < 1e-15);
    }
    let mae_of = |m: &str| report.aggregates.iter().find(|a| a.method == m).unwrap().mae.unwrap();
    let expected = 100.0 * (mae_of("oracle") - mae_of("adapter")) / mae_of("oracle");
    assert!((report.gains[0].gain_pct - expected).abs() < 1e-12);

    for r in &report.records {
        let calls = if r.method == "adapter" { 5 } else { 1 };
        assert_eq!(r.oracle_calls, calls, "{r:?}");
        assert!(r.smape.unwrap() <= 2.0 && r.mae.unwrap() <= r.rmse.unwrap());
    }
    assert_eq!(records_from_csv(&records_to_csv(&report.records)).unwrap(), report.records);
}

#[test]
fn failing_oracle_windows_are_recorded_not_dropped() {
    let dir = tempfile::tempdir().unwrap();
    let exp = experiment(dir.path());
    let broken = OracleSelector::Exec("exit 1".into());
    let report = run_benchmark(&[exp], &[Method::Adapter, Method::Oracle], &settings(broken)).unwrap();
    assert_eq!(report.records.len(), 4);
    for r in &report.records {
        assert!(r.error.is_some() && r.mae.is_none(), "{r:?}");
    }
    assert!(report.aggregates.iter().all(|a| a.failed == 2 && a.mae.is_none()));
    assert!(report.gains.is_empty());
    let parsed = records_from_csv(&records_to_csv(&report.records)).unwrap();
    assert_eq!(parsed, report.records);
}

fn metric() -> impl proptest::strategy::Strategy<Value = Option<f64>> {
    proptest::option::of(0.0..1e6f64)
}

proptest::proptest! {
    #[test]
    fn record_csv_round_trips(
        dataset in "[a-z_,\" ]{0,12}",
        window in 0usize..100,
        values in (metric(), metric(), metric(), metric(), metric()),
        calls in 0usize..20,
        reverted in 0usize..20,
        error in proptest::option::of("[a-z ,\"\n]{1,20}"),
    ) {
        let record = MetricRecord {
            dataset,
            window,
            method: "adapter".into(),
            mae: values.0,
            rmse: values.1,
            smape: values.2,
            smape_nonzero: values.3,
            mase: values.4,
            oracle_calls: calls,
            reverted,
            error,
        };
        let records = vec![record];
        proptest::prop_assert_eq!(records_from_csv(&records_to_csv(&records)).unwrap(), records);
    }
}
