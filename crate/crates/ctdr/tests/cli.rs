use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use ctdr::commands::{ABLATION_LADDER, CHECKPOINT_FILE, METRICS_FILE, REPORT_FILE, SUMMARY_FILE};
use ctdr::files::{read_metrics, read_report, read_summary};

fn ctdr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctdr")).args(args).output().unwrap()
}

fn quick(dir: &Path) -> Vec<String> {
    vec![
        "--set".into(),
        "epochs=4".into(),
        "--set".into(),
        "data.n_source=120".into(),
        "--set".into(),
        "data.n_target=120".into(),
        "--set".into(),
        "data.n_test=120".into(),
        "--set".into(),
        "hidden=16".into(),
        "--set".into(),
        "batch_size=32".into(),
        "--set".into(),
        format!("out.dir={}", dir.display()),
    ]
}

fn run(cmd: &str, dir: &Path, extra: &[&str]) -> Output {
    let mut args: Vec<String> = vec![cmd.into()];
    args.extend(quick(dir));
    args.extend(extra.iter().map(|s| s.to_string()));
    ctdr(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn train_writes_all_outputs_and_prints_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("train", dir.path(), &["--set", "out.embeddings=true"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in [METRICS_FILE, CHECKPOINT_FILE, REPORT_FILE, "standardizer.json", "embeddings.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    assert_eq!(read_metrics(&dir.path().join(METRICS_FILE)).unwrap().len(), 4);

    let printed = String::from_utf8(out.stdout).unwrap();
    assert!(printed.contains("epochs = 4\n"));
    let cfg = dir.path().join("resolved.cfg");
    fs::write(&cfg, &printed).unwrap();
    let other = tempfile::tempdir().unwrap();
    let again = ctdr(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        &format!("out.dir={}", other.path().display()),
    ]);
    assert!(again.status.success());
    assert_eq!(
        fs::read(dir.path().join(METRICS_FILE)).unwrap(),
        fs::read(other.path().join(METRICS_FILE)).unwrap()
    );
}

#[test]
fn seed_override_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert!(run("train", d.path(), &["--seed", "7"]).status.success());
    }
    assert!(run("train", c.path(), &["--seed", "8"]).status.success());
    let read = |d: &tempfile::TempDir| fs::read(d.path().join(METRICS_FILE)).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("train", dir.path(), &["--set", "bogus=1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
    let missing = ctdr(&["train", "--config", "/nonexistent/ctdr.cfg"]);
    assert_eq!(missing.status.code(), Some(4));
}

#[test]
fn divergence_exits_3_with_an_abort_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("train", dir.path(), &["--set", "lr=1e300"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join(METRICS_FILE)).unwrap();
    let last: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    assert_eq!(last["abort"], "non_finite_loss");
}

#[test]
fn eval_reproduces_the_final_metrics_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run("train", dir.path(), &[]).status.success());
    let metrics = read_metrics(&dir.path().join(METRICS_FILE)).unwrap();
    let ckpt = dir.path().join(CHECKPOINT_FILE);
    let report_path = dir.path().join("eval.json");
    let out = run(
        "eval",
        dir.path(),
        &["--checkpoint", ckpt.to_str().unwrap(), "--report", report_path.to_str().unwrap()],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(&report_path).unwrap();
    assert_eq!(report.accuracy, metrics.last().unwrap().acc.target_test);
    assert_eq!(report, read_report(&dir.path().join(REPORT_FILE)).unwrap());
    let printed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed["n_test"], 120);
}

#[test]
fn eval_with_mismatched_width_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run("train", dir.path(), &[]).status.success());
    let ckpt = dir.path().join(CHECKPOINT_FILE);
    let out = run(
        "eval",
        dir.path(),
        &[
            "--checkpoint",
            ckpt.to_str().unwrap(),
            "--set",
            "data.kind=gauss_shift",
            "--set",
            "data.standardize=false",
        ],
    );
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn ablate_writes_seven_rows_matching_standalone_training() {
    let dir = tempfile::tempdir().unwrap();
    let refused = run("ablate", dir.path(), &[]);
    assert_eq!(refused.status.code(), Some(2));
    let out = run("ablate", dir.path(), &["--set", "oracle=true"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_summary(&dir.path().join(SUMMARY_FILE)).unwrap();
    assert_eq!(rows.len(), 7);
    assert_eq!(rows.iter().map(|r| r.combo.as_str()).collect::<Vec<_>>(), ABLATION_LADDER);

    let ss = tempfile::tempdir().unwrap();
    assert!(run("train", ss.path(), &["--set", "combo=ss"]).status.success());
    let report = read_report(&ss.path().join(REPORT_FILE)).unwrap();
    assert_eq!(rows[0].target_test_accuracy, report.accuracy);
}

#[test]
fn synth_is_deterministic_and_feeds_sparse_training() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        assert!(run("synth", d.path(), &["--set", "data.seed=5"]).status.success());
    }
    for f in ctdr::commands::SYNTH_FILES {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
    let synth_metrics = {
        let d = tempfile::tempdir().unwrap();
        assert!(run("train", d.path(), &["--set", "data.seed=5"]).status.success());
        fs::read(d.path().join(METRICS_FILE)).unwrap()
    };
    let train_dir = tempfile::tempdir().unwrap();
    let p = |f: &str| a.path().join(f).display().to_string();
    let out = run(
        "train",
        train_dir.path(),
        &[
            "--set",
            "data.kind=sparse",
            "--set",
            &format!("data.source_path={}", p("source.txt")),
            "--set",
            &format!("data.target_path={}", p("target_train.txt")),
            "--set",
            &format!("data.test_path={}", p("target_test.txt")),
        ],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(fs::read(train_dir.path().join(METRICS_FILE)).unwrap(), synth_metrics);
}

#[test]
fn synth_rejects_file_backed_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("synth", dir.path(), &["--set", "data.kind=digits"]);
    assert_eq!(out.status.code(), Some(2));
}
