use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn attn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attn")).args(args).output().unwrap()
}

fn synth(dir: &Path) -> (PathBuf, PathBuf) {
    let (train, test) = (dir.join("train.txt.gz"), dir.join("test.txt"));
    let out = attn(&[
        "synth", "--kind", "gaussian-sep", "--n", "800", "--d", "20", "--margin", "0.5", "--seed", "4",
        "--out", train.to_str().unwrap(), "--n-test", "200", "--test-out", test.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    (train, test)
}

#[test]
fn train_writes_json_report_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = synth(dir.path());
    let out = attn(&["train", "--algo", "attentive", "--data", train.to_str().unwrap(), "--test", test.to_str().unwrap(), "--warmup", "20", "--epochs", "2"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["data"]["n_train"], 800);
    assert_eq!(v["data"]["n_test"], 200);
    assert_eq!(v["epochs"].as_array().unwrap().len(), 2);
    assert!(v["final"]["test_accuracy"].as_f64().unwrap() > 0.9);
}

#[test]
fn sweep_csv_has_documented_columns() {
    let dir = tempfile::tempdir().unwrap();
    let (train, test) = synth(dir.path());
    let csv = dir.path().join("sweep.csv");
    let out = attn(&[
        "sweep", "--data", train.to_str().unwrap(), "--test", test.to_str().unwrap(), "--param", "stride",
        "--values", "1,2,4", "--warmup", "20", "--csv", csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "param,value,updates,filtered,decision_errors,features_evaluated,features_available,train_mistakes,\
         test_accuracy,filtered_test_accuracy,mean_features_per_example,speedup_ratio,realized_delta,\
         baseline_updates,baseline_features_evaluated,baseline_test_accuracy"
    );
    let values: Vec<&str> = lines.map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(values, ["1", "2", "4"]);
}

#[test]
fn reflect_without_filter_has_no_errors() {
    let out = attn(&["reflect", "--walks", "2000", "--no-filter"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["filtered"], 0);
    assert_eq!(v["empirical_error"], 0.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (train, _) = synth(dir.path());
    let missing = dir.path().join("missing.txt");
    assert_eq!(attn(&["bench", "--data", missing.to_str().unwrap(), "--test", missing.to_str().unwrap()]).status.code(), Some(3));
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "+1 3:1.0 2:1.0\n").unwrap();
    assert_eq!(attn(&["bench", "--data", bad.to_str().unwrap(), "--test", bad.to_str().unwrap()]).status.code(), Some(3));
    let t = train.to_str().unwrap();
    assert_eq!(attn(&["bench", "--data", t, "--test", t, "--delta", "2"]).status.code(), Some(4));
    assert_eq!(attn(&["frobnicate"]).status.code(), Some(2));
}
