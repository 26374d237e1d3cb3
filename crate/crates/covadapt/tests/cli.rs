use std::path::Path;
use std::process::{Command, Output};

fn covadapt(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_covadapt")).args(args).current_dir(cwd).output().unwrap()
}

fn error_line(out: &Output) -> serde_json::Value {
    let text = String::from_utf8(out.stderr.clone()).unwrap();
    let last = text.lines().last().expect("stderr has an error line");
    serde_json::from_str(last).unwrap()
}

/// Blanks the target of the last `rows` rows so they become future rows.
fn open_last_rows(path: &Path, rows: usize) {
    let text = std::fs::read_to_string(path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let cut = lines.len() - rows;
    let mut out = String::new();
    for (i, line) in lines.iter().enumerate() {
        let mut cells: Vec<&str> = line.split(',').collect();
        if i >= cut {
            cells[1] = "";
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).unwrap();
}

const FORECAST: [&str; 14] = [
    "forecast", "--data", "s.csv", "--target", "y", "--covariates", "x", "--history", "120", "--horizon", "6",
    "--seasonality", "6", "--search",
];

#[test]
fn help_and_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let help = covadapt(&["--help"], dir.path());
    assert!(help.status.success());
    let text = String::from_utf8(help.stdout).unwrap();
    for sub in ["forecast", "evaluate", "ablate", "gen-synthetic"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
    assert_eq!(covadapt(&["frobnicate"], dir.path()).status.code(), Some(2));
}

#[test]
fn forecast_writes_one_row_per_step_and_leaves_input_alone() {
    let dir = tempfile::tempdir().unwrap();
    let gen = covadapt(&["gen-synthetic", "--seed", "1", "--length", "200", "--seasonality", "6", "--out", "s.csv"], dir.path());
    assert!(gen.status.success());
    open_last_rows(&dir.path().join("s.csv"), 6);
    let before = std::fs::read(dir.path().join("s.csv")).unwrap();

    let mut args = FORECAST.to_vec();
    args.extend(["compact", "--out", "f.csv"]);
    let out = covadapt(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,point,variance,reverted");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("195,"));
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("f.json")).unwrap()).unwrap();
    assert_eq!(summary["oracle_calls"], 5);
    assert_eq!(std::fs::read(dir.path().join("s.csv")).unwrap(), before);
}

#[test]
fn failures_map_to_exit_codes_and_json_lines() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = FORECAST.to_vec();
    args.extend(["compact", "--out", "f.csv"]);

    let missing = covadapt(&args, dir.path());
    assert_eq!(missing.status.code(), Some(3));
    let line = error_line(&missing);
    assert_eq!(line["error"], "io");
    assert!(line["message"].as_str().unwrap().contains("s.csv"));

    std::fs::write(dir.path().join("s.csv"), "y,z\n1,2\n").unwrap();
    let column = covadapt(&args, dir.path());
    assert_eq!(column.status.code(), Some(5));
    assert_eq!(error_line(&column)["code"], 5);

    std::fs::write(dir.path().join("s.csv"), "y,x\n1,2\nfoo,3\n").unwrap();
    assert_eq!(covadapt(&args, dir.path()).status.code(), Some(4));

    std::fs::write(dir.path().join("s.csv"), "y,x\n1,2\n2,3\n").unwrap();
    assert_eq!(covadapt(&args, dir.path()).status.code(), Some(7));

    assert!(covadapt(&["gen-synthetic", "--length", "200", "--seasonality", "6", "--out", "s.csv"], dir.path()).status.success());
    open_last_rows(&dir.path().join("s.csv"), 6);
    let mut bad = FORECAST.to_vec();
    bad.extend(["huge", "--out", "f.csv"]);
    assert_eq!(covadapt(&bad, dir.path()).status.code(), Some(6));
    assert!(!dir.path().join("f.csv").exists());
}

#[test]
fn config_file_paths_resolve_next_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("conf")).unwrap();
    let gen = covadapt(&["gen-synthetic", "--length", "200", "--seasonality", "6", "--out", "conf/s.csv"], dir.path());
    assert!(gen.status.success());
    open_last_rows(&dir.path().join("conf/s.csv"), 6);
    std::fs::write(
        dir.path().join("conf/run.toml"),
        "[dataset]\npath = \"s.csv\"\ntarget = \"y\"\ncovariates = [\"x\"]\n\
         [task]\nhistory = 120\nhorizon = 6\nseasonality = 6\n\
         [oracle]\nkind = \"seasonal-naive\"\n[adapter]\nsearch = \"compact\"\n",
    )
    .unwrap();
    let out = covadapt(&["forecast", "--config", "conf/run.toml", "--out", "f.csv"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(dir.path().join("f.csv")).unwrap().lines().count(), 7);
}
