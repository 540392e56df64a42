use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

fn bandloc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bandloc")).args(args).env_remove("BANDLOC_OUT").output().unwrap()
}

fn run_in(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--output-dir", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    bandloc(&args)
}

fn json(path: &Path) -> Value {
    serde_json::from_slice(&fs::read(path).unwrap()).unwrap()
}

fn assert_schema(summary: &Value) {
    let schema: Value = serde_json::from_str(include_str!("../schema/summary.schema.json")).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(summary).map(|e| format!("{} at {}", e, e.instance_path())).collect();
    assert!(errors.is_empty(), "{errors:#?}");
}

const SMALL_SWEEP: &[&str] = &["--experiment", "variance", "--w", "3", "--n", "4,8", "--trials", "100", "--seed", "5", "--chunk-size", "16"];

#[test]
fn single_trial_is_flagged_insufficient() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["--experiment", "variance", "--w", "2", "--n", "2", "--trials", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("trials.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "{csv}");
    let s = json(&dir.path().join("summary.json"));
    assert_eq!(s["schema_version"], 1);
    let cell = &s["result"]["cells"][0];
    assert_eq!(cell["count"], 1);
    assert_eq!(cell["var_gamma"], 0.0);
    assert_eq!(cell["insufficient_trials"], true);
    assert_schema(&s);
    assert!(s["result"]["flags"].as_array().unwrap().iter().any(|f| f.as_str().unwrap().starts_with("insufficient trials")));
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let clean = tempfile::tempdir().unwrap();
    assert!(run_in(clean.path(), SMALL_SWEEP).status.success());

    let dir = tempfile::tempdir().unwrap();
    let mut stopped = SMALL_SWEEP.to_vec();
    stopped.extend_from_slice(&["--stop-after-chunks", "3"]);
    let out = run_in(dir.path(), &stopped);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("stopped after 3 chunks"));
    assert!(!dir.path().join("summary.json").exists());
    let first: Vec<_> = (0..3).map(|k| fs::metadata(dir.path().join(format!("chunks/chunk-{k:06}.csv"))).unwrap().modified().unwrap()).collect();

    let mut resumed = SMALL_SWEEP.to_vec();
    resumed.push("--resume");
    assert!(run_in(dir.path(), &resumed).status.success());
    for (k, t) in first.iter().enumerate() {
        let now = fs::metadata(dir.path().join(format!("chunks/chunk-{k:06}.csv"))).unwrap().modified().unwrap();
        assert_eq!(&now, t, "chunk {k} was recomputed");
    }
    for file in ["trials.csv", "summary.json"] {
        assert_eq!(fs::read(clean.path().join(file)).unwrap(), fs::read(dir.path().join(file)).unwrap(), "{file}");
    }
    assert_eq!(json(&dir.path().join("manifest.json"))["complete"], true);
}

#[test]
fn corrupted_chunk_is_recomputed_on_resume() {
    let clean = tempfile::tempdir().unwrap();
    assert!(run_in(clean.path(), SMALL_SWEEP).status.success());
    let dir = tempfile::tempdir().unwrap();
    let mut stopped = SMALL_SWEEP.to_vec();
    stopped.extend_from_slice(&["--stop-after-chunks", "4"]);
    assert!(run_in(dir.path(), &stopped).status.success());
    let victim = dir.path().join("chunks/chunk-000001.csv");
    let mut bytes = fs::read(&victim).unwrap();
    let last = bytes.len() - 2;
    bytes[last] ^= 1;
    fs::write(&victim, bytes).unwrap();
    let mut resumed = SMALL_SWEEP.to_vec();
    resumed.push("--resume");
    assert!(run_in(dir.path(), &resumed).status.success());
    assert_eq!(fs::read(clean.path().join("trials.csv")).unwrap(), fs::read(dir.path().join("trials.csv")).unwrap());
}

#[test]
fn worker_count_does_not_change_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut one = SMALL_SWEEP.to_vec();
    one.extend_from_slice(&["--workers", "1"]);
    let mut eight = SMALL_SWEEP.to_vec();
    eight.extend_from_slice(&["--workers", "8"]);
    assert!(run_in(a.path(), &one).status.success());
    assert!(run_in(b.path(), &eight).status.success());
    for file in ["trials.csv", "summary.json"] {
        assert_eq!(fs::read(a.path().join(file)).unwrap(), fs::read(b.path().join(file)).unwrap(), "{file}");
    }
}

#[test]
fn invalid_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["--experiment", "variance", "--w", "2", "--n", "2", "--trials", "0"],
        vec!["--w", "2", "--n", "2", "--trials", "5"],
        vec!["--experiment", "wegner", "--w", "2", "--n", "2", "--trials", "5", "--t-list", "0.6"],
        vec!["--experiment", "bernstein", "--w", "2", "--n", "4", "--trials", "5", "--bernstein-c", "0.5"],
    ];
    for args in cases {
        let out = run_in(dir.path(), &args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "experiment = \"variance\"\nw = [2]\nn = [2]\ntrials = 5\nbogus = 1\n").unwrap();
    let out = bandloc(&["run", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let out = bandloc(&["radial", "--w", "4", "--a2", "0", "--b", "0", "--c", "0"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "experiment = \"decay\"\nw = [2]\nn = [4, 8]\ntrials = 20\nseed = 9\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = bandloc(&["run", "--config", cfg.to_str().unwrap(), "--trials", "30", "--output-dir", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = json(&out_dir.join("summary.json"));
    assert_eq!(s["experiment"], "decay");
    assert_eq!(s["config"]["trials"], 30);
    assert_eq!(s["config"]["seed"], 9);
    assert_eq!(s["result"]["cells"][1]["count"], 30);
    assert_schema(&s);
}

#[test]
fn output_directory_defaults_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_bandloc"))
        .args(["run", "--experiment", "invariance", "--w", "2", "--n", "1", "--trials", "200"])
        .env("BANDLOC_OUT", dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("summary.json").exists() && dir.path().join("manifest.json").exists());
}

#[test]
fn every_experiment_writes_a_versioned_summary() {
    let runs: [&[&str]; 5] = [
        &["--experiment", "wegner", "--w", "2,4", "--n", "4", "--trials", "100", "--t-list", "0.1,0.25"],
        &["--experiment", "radial", "--w", "4", "--n", "6", "--trials", "20"],
        &["--experiment", "split-verify", "--w", "3", "--n", "6", "--trials", "5"],
        &["--experiment", "invariance", "--w", "4", "--n", "1", "--trials", "500"],
        &["--experiment", "bernstein", "--w", "4", "--n", "5", "--trials", "2000", "--bernstein-copies", "8", "--t-list", "0,0.025,0.05"],
    ];
    for args in runs {
        let dir = tempfile::tempdir().unwrap();
        let out = run_in(dir.path(), args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        let s = json(&dir.path().join("summary.json"));
        assert_eq!(s["schema_version"], 1);
        assert_eq!(s["experiment"], args[1]);
        assert_eq!(s["config_hash"].as_str().unwrap().len(), 64);
        assert_schema(&s);
    }
}

#[test]
fn schema_rejects_unknown_result_keys() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(dir.path(), SMALL_SWEEP).status.success());
    let mut s = json(&dir.path().join("summary.json"));
    assert_schema(&s);
    s["result"]["extra"] = Value::Bool(true);
    let schema: Value = serde_json::from_str(include_str!("../schema/summary.schema.json")).unwrap();
    assert!(!jsonschema::validator_for(&schema).unwrap().is_valid(&s));
}

#[test]
fn replay_reproduces_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(dir.path(), SMALL_SWEEP).status.success());
    let manifest = dir.path().join("manifest.json");
    let out = bandloc(&["replay", manifest.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("summary.json: identical") && text.contains("trials.csv: identical"), "{text}");
    assert!(!text.contains("DIFFERS"));
}

#[test]
fn verify_passes_quickly_and_reports_tolerances() {
    let start = Instant::now();
    let out = bandloc(&["verify"]);
    let secs = start.elapsed().as_secs_f64();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(secs < 60.0, "verify took {secs} s");
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["passed"], true);
    let suites = r["suites"].as_array().unwrap();
    assert_eq!(suites.len(), 5);
    let tol = |name: &str| suites.iter().find(|s| s["suite"] == name).unwrap()["tolerance"].as_f64().unwrap();
    assert_eq!(tol("schur-dense"), 1e-8);
    assert_eq!(tol("recurrence"), 1e-10);
}

#[test]
fn injected_recurrence_fault_is_located() {
    let out = bandloc(&["verify", "--suite", "recurrence", "--inject-recurrence-fault", "5"]);
    assert_eq!(out.status.code(), Some(1));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["passed"], false);
    assert_eq!(r["suites"][0]["failing_site"], 5);
}

#[test]
fn radial_subcommand_reports_conditions() {
    let out = bandloc(&["radial", "--w", "4", "--a2", "1", "--b", "0", "--c", "0"]);
    assert!(out.status.success());
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    let exact = std::f64::consts::PI.powi(2) / 6.0 / 16.0;
    assert!((r["var_log_r"].as_f64().unwrap() - exact).abs() < 1e-9);
    assert_eq!(r["conditions"]["case"], "CaseI");
}
