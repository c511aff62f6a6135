use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_crowdimpute"));
    c.env("RUST_LOG", "warn").env_remove("CROWDIMPUTE_OUT_DIR");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    let out = bin().current_dir(dir).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn setup(dir: &Path) {
    run(dir, &["synth", "-n", "200", "--seed", "4"]);
}

fn run_stages(dir: &Path, out: &str) {
    run(dir, &["ampute", "-o", out, "--dataset", "fev.csv", "--schema", "schema.json", "--target", "age", "--target", "gender", "-n", "6", "--seed", "9"]);
    run(dir, &["describe", "-o", out]);
    run(dir, &["gen-survey", "-o", out, "-k", "4"]);
    run(dir, &["simulate-crowd", "-o", out, "--seed", "9"]);
    run(dir, &["impute-mice", "-o", out, "-m", "4", "--cycles", "3", "--seed", "9"]);
    run(dir, &["pool", "-o", out, "--provenance", "crowd"]);
    run(dir, &["pool", "-o", out, "--provenance", "machine"]);
    run(dir, &["report", "-o", out]);
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, acc: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, acc);
            } else {
                acc.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut acc = BTreeMap::new();
    walk(root, root, &mut acc);
    acc
}

#[test]
fn stages_are_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    run_stages(dir.path(), "a");
    let first = snapshot(&dir.path().join("a"));
    run_stages(dir.path(), "a");
    let second = snapshot(&dir.path().join("a"));
    assert_eq!(first.keys().collect::<Vec<_>>(), second.keys().collect::<Vec<_>>());
    for (path, bytes) in &first {
        assert!(bytes == &second[path], "{} changed on rerun", path.display());
    }
}

#[test]
fn composed_stages_match_run() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    run_stages(dir.path(), "staged");
    let report = run(
        dir.path(),
        &["run", "-o", "whole", "--dataset", "fev.csv", "--schema", "schema.json", "--target", "age", "--target", "gender", "-n", "6", "-k", "4", "-m", "4", "--cycles", "3", "--seed", "9"],
    );
    let staged = snapshot(&dir.path().join("staged"));
    let mut whole = snapshot(&dir.path().join("whole"));
    assert!(whole.remove(Path::new("manifest.json")).is_some());
    assert_eq!(staged.keys().collect::<Vec<_>>(), whole.keys().collect::<Vec<_>>());
    for (path, bytes) in &staged {
        assert!(bytes == &whole[path], "{} differs", path.display());
    }
    assert_eq!(report.stdout, fs::read(dir.path().join("whole/report.txt")).unwrap());
}

#[test]
fn config_file_run() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let cfg = r#"{"dataset": "fev.csv", "schema": "schema.json", "targets": ["age"], "n_missing": 5, "k": 3, "m": 3, "cycles": 2, "out_dir": "cfg"}"#;
    fs::write(dir.path().join("run.json"), cfg).unwrap();
    let out = run(dir.path(), &["run", "--config", "run.json", "--format", "json"]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["rows"].as_array().unwrap().len(), 5);
    assert!(dir.path().join("cfg/manifest.json").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let bad_schema = bin()
        .current_dir(dir.path())
        .args(["ampute", "--dataset", "fev.csv", "--schema", "missing.json", "--target", "age"])
        .output()
        .unwrap();
    assert_eq!(bad_schema.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_schema.stderr).contains("[ampute]"));

    let out_of_order = bin().current_dir(dir.path()).args(["report"]).output().unwrap();
    assert_eq!(out_of_order.status.code(), Some(2));

    let bad_flag = bin().current_dir(dir.path()).args(["pool", "--provenance", "oracle"]).output().unwrap();
    assert_eq!(bad_flag.status.code(), Some(2));

    let zero_k = bin()
        .current_dir(dir.path())
        .args(["run", "--dataset", "fev.csv", "--schema", "schema.json", "--target", "age", "-k", "0"])
        .output()
        .unwrap();
    assert_eq!(zero_k.status.code(), Some(2));
}
