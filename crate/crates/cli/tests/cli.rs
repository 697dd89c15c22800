use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_freeshap"))
        .args(args)
        .current_dir(dir)
        .env_remove("FREESHAP_OUT_DIR")
        .output()
        .expect("spawn freeshap")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

/// Small benchmark and its kernel under `dir/d`.
fn setup(dir: &Path) {
    let gen = run(dir, &["synth-data", "--out", "d", "--n-train", "12", "--test-size", "20", "--n-heldout", "10", "--seed", "1"]);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    let k = run(dir, &["synth-kernel", "--train-labels", "d/train.csv", "--test-labels", "d/rows.csv", "--out", "d"]);
    assert!(k.status.success(), "{}", String::from_utf8_lossy(&k.stderr));
}

const KERNEL: [&str; 6] = ["--kernel", "d/kernel.bin", "--train-labels", "d/train.csv", "--test-labels", "d/rows.csv"];

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(run(dir.path(), &["valuate", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run(dir.path(), &["kernel-info", "missing.bin"]).status.code(), Some(1));
    std::fs::write(dir.path().join("junk.bin"), b"not a kernel file at all....").unwrap();
    assert_eq!(run(dir.path(), &["kernel-info", "junk.bin"]).status.code(), Some(1));
}

#[test]
fn kernel_info_reports_header_and_digest() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let out = run(dir.path(), &["kernel-info", "--check", "d/kernel.bin"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n_train=12 n_test=30 n_classes=2 layout=0"));
    assert!(lines.next().unwrap().starts_with("symmetry_defect=0e0 mean_train_diagonal=1e0"));
    let digest = hex::encode(Sha256::digest(std::fs::read(dir.path().join("d/kernel.bin")).unwrap()));
    assert_eq!(lines.next(), Some(format!("sha256={digest}").as_str()));
}

#[test]
fn corr_of_a_file_with_itself_is_one() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    let mut args = vec!["valuate"];
    args.extend(KERNEL);
    args.extend(["--method", "freeshap", "--iters", "30", "--out", "v"]);
    assert!(run(dir.path(), &args).status.success());
    let out = run(dir.path(), &["corr", "v/scores.csv", "v/scores.csv"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "pearson=1.000000 spearman=1.000000");
}

#[test]
fn flags_override_config_which_overrides_defaults() {
    let dir = tempfile::tempdir().unwrap();
    setup(dir.path());
    std::fs::write(dir.path().join("cfg.json"), r#"{"method": "freeshap", "iters": 7, "out": "from-config"}"#).unwrap();
    let mut base = vec!["valuate", "--config", "cfg.json"];
    base.extend(KERNEL);

    assert!(run(dir.path(), &base).status.success());
    let m = manifest(&dir.path().join("from-config/valuate.manifest.json"));
    assert_eq!((m["method"].as_str(), m["iters"].as_u64()), (Some("mc"), Some(7)));

    let mut flagged = base.clone();
    flagged.extend(["--iters", "9", "--out", "from-flag"]);
    assert!(run(dir.path(), &flagged).status.success());
    let m = manifest(&dir.path().join("from-flag/valuate.manifest.json"));
    assert_eq!(m["iters"].as_u64(), Some(9));

    let env = Command::new(env!("CARGO_BIN_EXE_freeshap"))
        .args(&base)
        .current_dir(dir.path())
        .env("FREESHAP_OUT_DIR", "from-env")
        .output()
        .unwrap();
    assert!(env.status.success());
    assert!(dir.path().join("from-env/scores.csv").exists());

    std::fs::write(dir.path().join("bad.json"), r#"{"iterations": 7}"#).unwrap();
    let mut bad = vec!["valuate", "--config", "bad.json"];
    bad.extend(KERNEL);
    assert_eq!(run(dir.path(), &bad).status.code(), Some(1));
}
