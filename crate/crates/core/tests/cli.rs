use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use lp_llp::bags::load_bag_csv;
use lp_llp::experiment::ExperimentResult;
use lp_llp::load_dataset_csv;

fn llp(args: &[&str], extra: &[&Path]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_llp"));
    cmd.args(args);
    for p in extra {
        cmd.arg(p);
    }
    cmd.output().expect("binary runs")
}

#[test]
fn generate_writes_readable_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = llp(
        &["generate", "--dataset", "xor", "--n", "60", "--seed", "4", "--bags", "A", "--out"],
        &[dir.path()],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let ds = load_dataset_csv(&dir.path().join("dataset.csv"), Some("label")).unwrap();
    assert_eq!((ds.n(), ds.d()), (60, 2));
    let assignment = load_bag_csv(&dir.path().join("bags.csv"), 60).unwrap();
    assert_eq!(assignment.iter().max(), Some(&2));
    for bag in 0..3 {
        assert_eq!(assignment.iter().filter(|&&b| b == bag).count(), 20);
    }
}

#[test]
fn run_writes_csv_json_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    fs::write(
        &config,
        r#"{"dataset": {"kind": "xor"}, "bags": "b", "n_train": 60, "repeats": 3, "seed": 1,
            "gamma_grid": [0.01, 0.1, 1.0]}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = llp(&["run", "--trace", "--config"], &[&config]);
    assert!(!out.status.success(), "missing --out must be rejected");
    let out = Command::new(env!("CARGO_BIN_EXE_llp"))
        .args(["run", "--trace", "--eval-all", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let csv = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("dataset,format,lp_llp,train,completed,repeats"));
    assert!(lines.next().unwrap().starts_with("xor,60B,"));

    let json = fs::read_to_string(out_dir.join("results.json")).unwrap();
    let results: Vec<ExperimentResult> = serde_json::from_str(&json).unwrap();
    assert_eq!(results[0].repeats.len(), 3);
    assert!(results[0].repeats.iter().all(|r| r.all_accuracy.is_some()));
    assert!(out_dir.join("trace.json").exists());
}

#[test]
fn sweep_emits_one_row_per_format() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    fs::write(
        &config,
        r#"{"dataset": {"kind": "half_kernel"}, "bags": "a", "n_train": 60, "repeats": 2,
            "gamma_grid": [1.0]}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = Command::new(env!("CARGO_BIN_EXE_llp"))
        .args(["sweep", "--formats", "60A,60B", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(out_dir.join("results.csv")).unwrap();
    let formats: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(formats, ["60A", "60B"]);
}

#[test]
fn bad_config_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    fs::write(&config, r#"{"dataset": {"kind": "xor"}, "bags": "b", "n_train": 60, "alpha": 2}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_llp"))
        .args(["run", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
}
