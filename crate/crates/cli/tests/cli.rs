use std::collections::BTreeMap;
use std::path::Path;
use std::process::{Command, Output};

fn lscd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lscd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = lscd(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path) {
    ok(&[
        "synth", "--out-dir", p(dir), "--seed", "4", "--vocab-size", "200", "--sentences", "4000", "--targets", "6",
        "--changed", "3",
    ]);
}

const HP: [&str; 6] = ["--dim", "12", "--window", "4", "--epochs", "2"];

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "manifest.txt")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect()
}

#[test]
fn chained_stages_reproduce_run() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let (c1, c2) = (data.join("corpus1.txt"), data.join("corpus2.txt"));
    let (targets, gold) = (data.join("targets.txt"), data.join("gold.tsv"));

    let run = tmp.path().join("run");
    let mut args = vec![
        "run", "--corpus1", p(&c1), "--corpus2", p(&c2), "--targets", p(&targets), "--gold", p(&gold), "--out-dir",
        p(&run), "--seed", "3",
    ];
    args.extend(HP);
    let stdout = ok(&args);
    assert!(stdout.contains("accuracy\t"));

    let s = tmp.path().join("staged");
    let emb = |n: &str| s.join(n);
    let (e1, e2) = (emb("emb1.vec"), emb("emb2.vec"));
    let mut train1 = vec!["train", "--corpus", p(&c1), "--out", p(&e1), "--seed", "3"];
    train1.extend(HP);
    ok(&train1);
    // the second corpus trains with the next seed
    let mut train2 = vec!["train", "--corpus", p(&c2), "--out", p(&e2), "--seed", "4"];
    train2.extend(HP);
    ok(&train2);
    ok(&["align", "--emb1", p(&emb("emb1.vec")), "--emb2", p(&emb("emb2.vec")), "--out-dir", p(&s)]);
    ok(&[
        "score",
        "--aligned1",
        p(&emb("aligned1.vec")),
        "--aligned2",
        p(&emb("aligned2.vec")),
        "--targets",
        p(&targets),
        "--vocab1",
        p(&emb("emb1.vocab.tsv")),
        "--vocab2",
        p(&emb("emb2.vocab.tsv")),
        "--out-dir",
        p(&s),
    ]);
    ok(&[
        "threshold",
        "--scores",
        p(&emb("scores.tsv")),
        "--targets",
        p(&targets),
        "--out",
        p(&emb("threshold.tsv")),
    ]);
    ok(&[
        "label",
        "--scores",
        p(&emb("scores.tsv")),
        "--targets",
        p(&targets),
        "--threshold",
        p(&emb("threshold.tsv")),
        "--gold",
        p(&gold),
        "--out-dir",
        p(&s),
    ]);
    ok(&[
        "eval",
        "--labels",
        p(&emb("labels.tsv")),
        "--scores",
        p(&emb("scores.tsv")),
        "--gold",
        p(&gold),
        "--out",
        p(&emb("report.tsv")),
    ]);

    let (a, b) = (files(&run), files(&s));
    assert_eq!(a.keys().collect::<Vec<_>>(), b.keys().collect::<Vec<_>>());
    for (name, bytes) in &a {
        assert!(bytes == &b[name], "{name} differs between run and chained stages");
    }
}

#[test]
fn replaying_a_manifest_reproduces_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let first = tmp.path().join("first");
    let (c1, c2, targets) = (data.join("corpus1.txt"), data.join("corpus2.txt"), data.join("targets.txt"));
    let mut args = vec![
        "run",
        "--corpus1",
        p(&c1),
        "--corpus2",
        p(&c2),
        "--targets",
        p(&targets),
        "--out-dir",
        p(&first),
        "--baseline",
        "freq",
    ];
    args.extend(HP);
    ok(&args);
    let second = tmp.path().join("second");
    ok(&["run", "--config", p(&first.join("manifest.txt")), "--out-dir", p(&second)]);
    assert_eq!(files(&first), files(&second));
}

#[test]
fn missing_targets_file_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    let missing = tmp.path().join("no_such_targets.txt");
    let out = lscd(&[
        "run",
        "--corpus1",
        p(&data.join("corpus1.txt")),
        "--corpus2",
        p(&data.join("corpus2.txt")),
        "--targets",
        p(&missing),
        "--out-dir",
        p(&tmp.path().join("out")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("no_such_targets.txt"), "{stderr}");
}

#[test]
fn threshold_stage_values() {
    let tmp = tempfile::tempdir().unwrap();
    let scores = tmp.path().join("scores.tsv");
    let targets = tmp.path().join("targets.txt");
    std::fs::write(&scores, "a\t0.1\nb\t0.2\nc\t0.3\n").unwrap();
    std::fs::write(&targets, "a\nb\nc\n").unwrap();
    let out = tmp.path().join("th.tsv");
    let v: f64 = ok(&["threshold", "--scores", p(&scores), "--targets", p(&targets), "--out", p(&out)])
        .trim()
        .parse()
        .unwrap();
    assert!((v - 0.281650).abs() < 1e-6, "{v}");
    assert!(std::fs::read_to_string(&out).unwrap().contains("std_mode\tpopulation"));

    std::fs::write(&scores, "a\t0.1\nb\t0.2\nc\t0.6\nd\t0.9\n").unwrap();
    std::fs::write(&targets, "a\nb\nc\nd\n").unwrap();
    let v: f64 = ok(&[
        "threshold",
        "--scores",
        p(&scores),
        "--targets",
        p(&targets),
        "--threshold-method",
        "median-split",
        "--out",
        p(&out),
    ])
    .trim()
    .parse()
    .unwrap();
    assert!((v - 0.4).abs() < 1e-12, "{v}");
}

#[test]
fn eval_reports_metrics_and_rejects_bad_gold() {
    let tmp = tempfile::tempdir().unwrap();
    let gold = tmp.path().join("gold.tsv");
    let labels = tmp.path().join("labels.tsv");
    let scores = tmp.path().join("scores.tsv");
    std::fs::write(&gold, "a\t1\nb\t0\nc\t1\n").unwrap();
    std::fs::write(&labels, "a\t1\nb\t1\nc\t1\n").unwrap();
    std::fs::write(&scores, "a\t0.9\nb\t0.8\nc\t0.7\nd\t0.1\n").unwrap();
    let out = tmp.path().join("report.tsv");
    let stdout = ok(&[
        "eval", "--labels", p(&labels), "--scores", p(&scores), "--gold", p(&gold), "--out", p(&out),
    ]);
    let metric = |name: &str| -> f64 {
        stdout
            .lines()
            .find_map(|l| l.strip_prefix(&format!("{name}\t")))
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((metric("accuracy") - 2.0 / 3.0).abs() < 1e-12);
    assert!((metric("average_precision") - 0.8333).abs() < 1e-4);

    std::fs::write(&gold, "a\t1\nb\tyes\n").unwrap();
    let bad = lscd(&[
        "eval", "--labels", p(&labels), "--scores", p(&scores), "--gold", p(&gold), "--out", p(&out),
    ]);
    assert_eq!(bad.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&bad.stderr);
    assert!(stderr.contains("gold.tsv:2:") && stderr.contains("evaluate"), "{stderr}");
}

#[test]
fn non_finite_embeddings_exit_with_numeric_code() {
    let tmp = tempfile::tempdir().unwrap();
    let e1 = tmp.path().join("e1.vec");
    let e2 = tmp.path().join("e2.vec");
    std::fs::write(&e1, "2 2\na 1 NaN\nb 0 1\n").unwrap();
    std::fs::write(&e2, "2 2\na 1 0\nb 0 1\n").unwrap();
    let out = lscd(&["align", "--emb1", p(&e1), "--emb2", p(&e2), "--out-dir", p(tmp.path())]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(lscd(&["train", "--bogus"]).status.code(), Some(1));
    assert_eq!(lscd(&["threshold", "--threshold-method", "mode"]).status.code(), Some(1));
    assert_eq!(lscd(&["--help"]).status.code(), Some(0));
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("c.txt");
    std::fs::write(&corpus, "a b c\n").unwrap();
    let out = lscd(&["train", "--corpus", p(&corpus), "--out", p(&tmp.path().join("e.vec")), "--dim", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn baseline_stage_runs_each_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    synth(&data);
    for name in ["freq", "colloc", "majority"] {
        let out = tmp.path().join(name);
        let stdout = ok(&[
            "baseline",
            "--baseline",
            name,
            "--corpus1",
            p(&data.join("corpus1.txt")),
            "--corpus2",
            p(&data.join("corpus2.txt")),
            "--targets",
            p(&data.join("targets.txt")),
            "--gold",
            p(&data.join("gold.tsv")),
            "--out-dir",
            p(&out),
        ]);
        assert!(stdout.starts_with("accuracy\t"));
        let labels = std::fs::read_to_string(out.join(format!("baseline_{name}_labels.tsv"))).unwrap();
        assert_eq!(labels.lines().count(), 6);
    }
}
