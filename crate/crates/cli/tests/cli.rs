use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn nash(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nash"))
        .args(args)
        .output()
        .expect("spawn nash")
}

fn ok(args: &[&str]) -> String {
    let out = nash(args);
    assert!(
        out.status.success(),
        "nash {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small, fast training settings.
const SMALL: [&str; 6] = [
    "--set",
    "encoder_hidden=32",
    "--set",
    "batch_size=20",
    "--set",
    "classifier_hidden=16",
];

/// A synthetic three-topic corpus built into `<tmp>/corpus`.
fn built_corpus() -> (TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw.tsv");
    ok(&[
        "synth",
        "--kind",
        "cluster",
        "--output",
        s(&raw),
        "--seed",
        "1",
    ]);
    let corpus = tmp.path().join("corpus");
    ok(&[
        "build",
        "--input",
        s(&raw),
        "--out-dir",
        s(&corpus),
        "--seed",
        "1",
    ]);
    (tmp, corpus)
}

fn train_small(corpus: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        "train",
        "--corpus",
        s(corpus),
        "--out-dir",
        s(out),
        "--epochs",
        "3",
    ];
    args.extend(SMALL);
    args.extend(extra);
    nash(&args)
}

#[test]
fn build_writes_artifacts_and_reproducible_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw.tsv");
    fs::write(
        &raw,
        "sci\tatoms and molecules\nsport\tthe game went long\nsci\tquantum atoms\n",
    )
    .unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let summary = ok(&["build", "--input", s(&raw), "--out-dir", s(&a)]);
    assert!(summary.contains("documents=3"), "{summary}");
    ok(&["build", "--input", s(&raw), "--out-dir", s(&b)]);
    for f in [
        "vocab.txt",
        "features.txt",
        "labels.txt",
        "split.txt",
        "manifest.txt",
    ] {
        assert!(a.join(f).exists(), "{f}");
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let manifest = fs::read_to_string(a.join("manifest.txt")).unwrap();
    assert!(manifest.contains("command=build"));
    assert!(manifest.contains("artifact=features.txt\tsha256:"));
    assert!(!manifest.contains("pending"));
}

#[test]
fn malformed_line_is_reported_with_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw.tsv");
    let mut text: String = (1..=16).map(|i| format!("a\tdoc number {i}\n")).collect();
    text.push_str("no tab on this line\n");
    fs::write(&raw, text).unwrap();
    let out = nash(&["build", "--input", s(&raw), "--out-dir", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains(":17:"), "{err}");
}

#[test]
fn train_eval_encode_and_analyze() {
    let (tmp, corpus) = built_corpus();
    let run = tmp.path().join("run");
    let out = train_small(&corpus, &run, &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let log = fs::read_to_string(run.join("metrics.log")).unwrap();
    let epochs: Vec<&str> = log.lines().map(|l| l.split(' ').next().unwrap()).collect();
    assert_eq!(epochs, ["epoch=1", "epoch=2", "epoch=3"]);
    assert!(run.join("model.ckpt").exists() && run.join("state.ckpt").exists());
    let manifest = fs::read_to_string(run.join("manifest.txt")).unwrap();
    assert!(manifest.contains("config.bits=16") && !manifest.contains("pending"));

    let model = run.join("model.ckpt");
    let eval = ok(&[
        "eval",
        "--corpus",
        s(&corpus),
        "--model",
        s(&model),
        "--k",
        "10",
    ]);
    let p: f64 = eval
        .trim()
        .strip_prefix("precision_at_10=")
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.0..=1.0).contains(&p));

    let codes = ok(&["encode", "--corpus", s(&corpus), "--model", s(&model)]);
    assert_eq!(codes.lines().count(), 300);
    assert!(codes
        .lines()
        .all(|l| l.split('\t').nth(1).unwrap().len() == 16));
    let dump = ok(&[
        "dump-codes",
        "--corpus",
        s(&corpus),
        "--model",
        s(&model),
        "--split",
        "test",
    ]);
    assert!(dump
        .lines()
        .all(|l| l.split('\t').nth(1).unwrap().starts_with("topic")));

    let words = ok(&[
        "words",
        "--corpus",
        s(&corpus),
        "--model",
        s(&model),
        "--probe",
        "topic0word0",
        "-n",
        "5",
    ]);
    assert_eq!(words.lines().count(), 5);
    let out = nash(&[
        "words",
        "--corpus",
        s(&corpus),
        "--model",
        s(&model),
        "--probe",
        "topic0wrd0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("topic0word0"));

    let csv = ok(&["rd-curve", "--log", s(&run.join("metrics.log"))]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "iter,rate_bits,distortion");
    assert_eq!(lines.len(), 4);

    let bad = tmp.path().join("bits32.conf");
    fs::write(&bad, "bits=32\n").unwrap();
    let out = nash(&[
        "eval",
        "--corpus",
        s(&corpus),
        "--model",
        s(&model),
        "--config",
        s(&bad),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn training_is_byte_identical_across_runs_and_threads() {
    let (tmp, corpus) = built_corpus();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(train_small(&corpus, &a, &[]).status.success());
    assert!(train_small(&corpus, &b, &["--threads", "2"])
        .status
        .success());
    for f in ["model.ckpt", "state.ckpt", "metrics.log", "manifest.txt"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn bit_sweep_writes_one_run_per_length() {
    let (tmp, corpus) = built_corpus();
    let run = tmp.path().join("sweep");
    let out = train_small(
        &corpus,
        &run,
        &["--bits", "8,16,32", "--set", "max_epochs=1"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for l in [8, 16, 32] {
        let dir = run.join(format!("bits-{l}"));
        assert!(dir.join("model.ckpt").exists());
        let manifest = fs::read_to_string(dir.join("manifest.txt")).unwrap();
        assert!(manifest.contains(&format!("config.bits={l}\n")));
    }
}

#[test]
fn supervised_run_logs_classification_loss() {
    let (tmp, corpus) = built_corpus();
    let run = tmp.path().join("sup");
    let out = train_small(
        &corpus,
        &run,
        &["--supervised", "--alpha", "0.1", "--set", "max_epochs=1"],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let log = fs::read_to_string(run.join("metrics.log")).unwrap();
    let dis: f64 = log
        .split_whitespace()
        .find_map(|f| f.strip_prefix("loss_dis="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(dis > 0.0);
}

#[test]
fn divergence_exits_3_and_keeps_a_model() {
    let (tmp, corpus) = built_corpus();
    let run = tmp.path().join("bad");
    let out = train_small(&corpus, &run, &["--learning-rate", "1e300"]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let model = run.join("model.ckpt");
    assert!(model.exists());
    ok(&["encode", "--corpus", s(&corpus), "--model", s(&model)]);
}

#[test]
fn label_pure_database_has_full_precision() {
    let tmp = tempfile::tempdir().unwrap();
    let raw = tmp.path().join("raw.tsv");
    let text: String = (0..60)
        .map(|i| format!("only\tword{} word{} common\n", i % 7, i % 5))
        .collect();
    fs::write(&raw, text).unwrap();
    let corpus = tmp.path().join("corpus");
    ok(&["build", "--input", s(&raw), "--out-dir", s(&corpus)]);
    let run = tmp.path().join("run");
    assert!(train_small(&corpus, &run, &["--set", "max_epochs=1"])
        .status
        .success());
    let eval = ok(&[
        "eval",
        "--corpus",
        s(&corpus),
        "--model",
        s(&run.join("model.ckpt")),
    ]);
    assert_eq!(eval.trim(), "precision_at_100=1.0000");
}

#[test]
fn ablate_writes_a_table() {
    let (tmp, corpus) = built_corpus();
    let out = tmp.path().join("ablate");
    let mut args = vec![
        "ablate",
        "--corpus",
        s(&corpus),
        "--out-dir",
        s(&out),
        "--axes",
        "decoder-depth",
    ];
    args.extend(["--width", "16", "--epochs", "1", "--k", "10"]);
    args.extend(SMALL);
    ok(&args);
    let table = fs::read_to_string(out.join("ablation.tsv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "axis\tsetting\tprecision_at_10\tbest_epoch");
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("decoder-depth\t0\t"));
}

#[test]
fn flags_are_documented_and_unknown_flags_rejected() {
    for cmd in [
        "build",
        "train",
        "encode",
        "eval",
        "ablate",
        "words",
        "dump-codes",
        "rd-curve",
        "synth",
    ] {
        let help = ok(&[cmd, "--help"]);
        for flag in ["--config", "--seed", "--out-dir", "--threads"] {
            assert!(help.contains(flag), "{cmd} help lacks {flag}");
        }
    }
    assert_eq!(nash(&["train", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(nash(&["frobnicate"]).status.code(), Some(2));
}
