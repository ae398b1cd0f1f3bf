use std::fs;
use std::process::{Command, Stdio};

fn featsel() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_featsel"));
    cmd.stdout(Stdio::null());
    cmd
}

#[test]
fn baseline_smoke_writes_one_row_and_config_echo() {
    let dir = tempfile::tempdir().unwrap();
    let status = featsel()
        .args([
            "baseline",
            "--model",
            "svm",
            "--data",
            "synthetic",
            "--seed",
            "22",
            "--out",
        ])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let md = fs::read_to_string(dir.path().join("baseline.md")).unwrap();
    let lines: Vec<&str> = md.lines().collect();
    assert_eq!(lines[0], "| Model | Final Train Accuracy | Test Accuracy |");
    assert_eq!(lines.len(), 3);
    assert!(lines[2].starts_with("| SVM | "));
    let echo: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("baseline_config.json")).unwrap())
            .unwrap();
    assert_eq!(echo["master_seed"], 22);
    assert_eq!(echo["svm"]["config"]["c"], 1.0);
    assert_eq!(echo["mlp"]["train"]["epochs"], 500);
}

#[test]
fn csv_input_round_trips_through_gen_data() {
    let dir = tempfile::tempdir().unwrap();
    assert!(featsel()
        .args(["gen-data", "--n-records", "80", "--out"])
        .arg(dir.path())
        .status()
        .unwrap()
        .success());
    let csv = dir.path().join("data.csv");
    let header = fs::read_to_string(&csv).unwrap();
    assert!(header.starts_with("rgb_1,rgb_2,rgb_3,rgb_4,rgb_5,thermal_1,"));
    let out = dir.path().join("run");
    assert!(featsel()
        .args(["correlate", "--model", "svm", "--data"])
        .arg(&csv)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let ablation = fs::read_to_string(out.join("correlation_ablation.csv")).unwrap();
    assert_eq!(ablation.lines().count(), 6);
}

#[test]
fn usage_errors_exit_1_and_runtime_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let code = |args: &[&str]| featsel().args(args).output().unwrap().status.code();
    assert_eq!(code(&["ga", "--model", "tree"]), Some(1));
    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(
        code(&["baseline", "--data", "/definitely/missing.csv"]),
        Some(2)
    );
    let out = dir.path().to_str().unwrap();
    // nothing to combine yet
    fs::create_dir_all(dir.path()).unwrap();
    assert_eq!(code(&["report", "--out", out]), Some(2));
    assert_eq!(
        code(&["ga", "--pop", "2", "--gen", "1", "--out", out]),
        Some(2)
    );
    assert_eq!(code(&["--help"]), Some(0));
}

#[test]
fn ga_summary_has_improvement_column() {
    let dir = tempfile::tempdir().unwrap();
    assert!(featsel()
        .args([
            "ga",
            "--model",
            "ann",
            "--strategy",
            "tournament",
            "--pop",
            "6",
            "--gen",
            "2",
            "--epochs",
            "30",
            "--n-records",
            "120",
            "--out",
        ])
        .arg(dir.path())
        .status()
        .unwrap()
        .success());
    let md = fs::read_to_string(dir.path().join("ga_summary.md")).unwrap();
    assert!(md
        .lines()
        .next()
        .unwrap()
        .ends_with("| Test Accuracy | Baseline | Improvement |"));
    let log = fs::read_to_string(dir.path().join("ga_log_ann.csv")).unwrap();
    assert_eq!(log.lines().count(), 3);
}
