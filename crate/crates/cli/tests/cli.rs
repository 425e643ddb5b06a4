use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
gamma = 0.9
horizon = 5
n_trajectories = [10, 20]
n_seeds = 3
estimators = ["IS", "WIS", "NAIVE", "FQE", "DR/FQE", "WDR/FQE", "MAGIC/FQE", "IH"]

[env]
kind = "graph"
stochastic_env = true

[behavior]
kind = "static"
p0 = 0.5

[evaluation]
kind = "static"
p0 = 0.7
"#;

fn opebench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opebench")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("exp.toml");
    std::fs::write(&path, CONFIG).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn list_estimators_prints_the_catalog() {
    let text = stdout(&opebench(&["list-estimators"]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 34);
    assert_eq!(lines[0], "IS\tIPS");
    assert!(lines.contains(&"IH\tDM"));
    assert!(lines.contains(&"MAGIC/Tree\tHM"));
}

#[test]
fn run_writes_reports_and_is_thread_count_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let one = dir.path().join("one");
    let four = dir.path().join("four");
    stdout(&opebench(&["run", "--config", &cfg, "--out", one.to_str().unwrap(), "--threads", "1", "--dump-q"]));
    let four_out = opebench(&["run", "--config", &cfg, "--out", four.to_str().unwrap()]);
    assert!(stdout(&four_out).contains("true value"));

    let a = std::fs::read(one.join("report.csv")).unwrap();
    let b = std::fs::read(four.join("report.csv")).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 3 * 8);
    assert!(text.starts_with("env,T,gamma,N,seed,estimator,class,estimate,true_value,status\n"));
    assert!(one.join("q_dump.jsonl").exists() && !four.join("q_dump.jsonl").exists());

    let summary = std::fs::read_to_string(one.join("summary.csv")).unwrap();
    let csv = stdout(&opebench(&["report", "--in", one.to_str().unwrap(), "--format", "csv"]));
    assert_eq!(csv, summary);
    let md = stdout(&opebench(&["report", "--in", one.to_str().unwrap(), "--format", "md"]));
    assert_eq!(md, std::fs::read_to_string(one.join("report.md")).unwrap());
    assert!(md.contains("| FQE |") && md.contains("| IH |"));
}

#[test]
fn truth_prints_the_exact_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let value: f64 = stdout(&opebench(&["truth", "--config", &cfg])).trim().parse().unwrap();
    // dense graph with slip 0.25: per step E[r] = 2·P(odd) − 1, P(odd) = 0.7·0.75 + 0.3·0.25
    let per_step = 2.0 * (0.7 * 0.75 + 0.3 * 0.25) - 1.0;
    let expected: f64 = (0..5).map(|t| 0.9f64.powi(t) * per_step).sum();
    assert!((value - expected).abs() < 1e-9, "{value} vs {expected}");
}

#[test]
fn generate_writes_jsonl_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("data.jsonl");
    stdout(&opebench(&["generate", "--config", &cfg, "--n", "12", "--seed", "4", "--out", out.to_str().unwrap()]));
    let lines = std::fs::read_to_string(&out).unwrap();
    assert_eq!(lines.lines().count(), 12);
    let first: serde_json::Value = serde_json::from_str(lines.lines().next().unwrap()).unwrap();
    assert_eq!(first["actions"].as_array().unwrap().len(), 5);
    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("data.jsonl.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["N"], 12);
    assert_eq!(meta["T"], 5);
    assert_eq!(meta["seed"], 4);
}

#[test]
fn invalid_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, CONFIG.replace("\"IH\"", "\"XYZ\"")).unwrap();
    let out = opebench(&["run", "--config", path.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("XYZ"));
}

#[test]
fn bundled_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let value: f64 = stdout(&opebench(&["truth", "--config", path.to_str().unwrap()])).trim().parse().unwrap();
            assert!(value.is_finite(), "{}", path.display());
            seen += 1;
        }
    }
    assert!(seen >= 5);
}
