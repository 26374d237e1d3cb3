//! The exec oracle against a mock model speaking the JSON-lines protocol.

use std::time::Duration;

use covadapt::remote::ExecOracle;
use covadapt_core::oracle::builtin_seasonal_naive;
use covadapt_core::{run_adapter, AdapterConfig, Matrix, Oracle, OracleRequest, SearchSpace, TaskSpec, TimeSeriesInstance};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Echoes the id and repeats the last history value `horizon` times.
const LAST_VALUE_MOCK: &str = r#"while IFS= read -r line; do
  id=$(printf '%s' "$line" | sed 's/.*"id":\([0-9]*\).*/\1/')
  h=$(printf '%s' "$line" | sed 's/.*"horizon":\([0-9]*\).*/\1/')
  last=$(printf '%s' "$line" | sed 's/.*[[,]\([^],[]*\)\],"horizon".*/\1/')
  mean=$(awk -v v="$last" -v h="$h" 'BEGIN { for (j = 0; j < h; j++) printf "%s%s", (j ? "," : ""), v }')
  printf '{"id":%s,"mean":[%s]}\n' "$id" "$mean"
done"#;

/// Seasonal-naive with period 4, one awk call per request line.
const SEASONAL_MOCK: &str = r#"while IFS= read -r line; do printf '%s\n' "$line" | awk '{
  id = $0; sub(/.*"id":/, "", id); sub(/,.*/, "", id)
  h = $0; sub(/.*"horizon":/, "", h); sub(/}.*/, "", h)
  hist = $0; sub(/.*"history":\[/, "", hist); sub(/\].*/, "", hist)
  n = split(hist, v, ",")
  out = ""
  for (j = 0; j < h; j++) { out = out (j ? "," : "") v[n - 4 + 1 + (j % 4)] }
  printf "{\"id\":%s,\"mean\":[%s]}\n", id, out
}'; done"#;

#[test]
fn hundred_randomized_requests_round_trip() {
    let mut oracle = ExecOracle::spawn(LAST_VALUE_MOCK, Duration::from_secs(30)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..100 {
        let len = rng.random_range(1..200);
        let history: Vec<f64> = (0..len).map(|_| rng.random_range(-1e3..1e3)).collect();
        let horizon = rng.random_range(1..48);
        let id = rng.random_range(1..u64::MAX / 2);
        let request = OracleRequest::new(&history, horizon, id).unwrap();
        let reply = oracle.forecast(&request).unwrap();
        assert_eq!(reply.request_id, id);
        assert_eq!(reply.mean, vec![history[len - 1]; horizon]);
    }
}

#[test]
fn adapter_over_exec_matches_the_in_process_oracle() {
    let (h, f, s) = (64, 4, 4);
    let x: Vec<f64> = (0..h + f).map(|i| ((i as f64) * 0.3).cos()).collect();
    let y: Vec<f64> = (0..h + f).map(|i| 5.0 + [0.0, 1.0, 0.5, -1.0][i % 4] + x[i]).collect();
    let covariates = Matrix::from_row_major(h + f, 1, x).unwrap();
    let instance = TimeSeriesInstance::new(y[..h].to_vec(), covariates, f, Some(y[h..].to_vec()), "1D", s).unwrap();
    let spec = TaskSpec::with_defaults(h, f, s, 1).unwrap();
    let config = AdapterConfig { search_space: SearchSpace::compact(), ..AdapterConfig::default() };

    let exec = ExecOracle::spawn(SEASONAL_MOCK, Duration::from_secs(30)).unwrap();
    let remote = run_adapter(&instance, &spec, exec, &config).unwrap();
    let local = run_adapter(&instance, &spec, builtin_seasonal_naive(s).unwrap(), &config).unwrap();
    assert_eq!(remote.result.oracle_calls, config.budget());
    assert_eq!(remote, local);
}

#[test]
fn error_replies_and_mismatched_ids_are_oracle_errors() {
    let mut failing = ExecOracle::spawn(
        r#"while read line; do echo '{"id":1,"error":"model not loaded"}'; done"#,
        Duration::from_secs(10),
    )
    .unwrap();
    let e = failing.forecast(&OracleRequest::new(&[1.0], 1, 1).unwrap()).unwrap_err();
    assert!(e.to_string().contains("model not loaded"));
    let e = failing.forecast(&OracleRequest::new(&[1.0], 1, 2).unwrap()).unwrap_err();
    assert!(e.to_string().contains("does not match"));
    assert_eq!(covadapt::Error::from(e).exit_code(), 11);
}
