use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn ucca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ucca"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = ucca(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn error_json(out: &Output) -> Value {
    let v: Value = serde_json::from_slice(&out.stderr).expect("stderr is JSON");
    assert!(v["message"].is_string());
    v
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_spec(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("spec.json");
    std::fs::write(&path, body).unwrap();
    path
}

#[test]
fn convert_restore_round_trip_scores_primary_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let (g, t, r) = (
        dir.path().join("g.jsonl"),
        dir.path().join("t.txt"),
        dir.path().join("r.jsonl"),
    );
    let spec = write_spec(dir.path(), r#"{"sentences": 30}"#);
    let gen = ok_json(&["gen", "--spec", p(&spec), "--seed", "9", "--out", p(&g)]);
    assert_eq!(gen["sentences"], 30);

    for format in ["sexpr", "json"] {
        let conv = ok_json(&["convert", "--in", p(&g), "--out", p(&t), "--format", format]);
        assert_eq!(conv["sentences"], 30);
        assert_eq!(conv["dropped_remote_edges"], gen["remote_edges"]);
        ok_json(&["restore", "--in", p(&t), "--out", p(&r)]);
        let report = ok_json(&["eval", "--gold", p(&g), "--pred", p(&r)]);
        assert_eq!(report["primary"]["f1"], 1.0, "{format}");
    }
}

#[test]
fn gen_is_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    ok_json(&["gen", "--seed", "4", "--out", p(&a)]);
    ok_json(&["gen", "--seed", "4", "--out", p(&b)]);
    ok_json(&["gen", "--seed", "5", "--out", p(&c)]);
    let read = |x: &Path| std::fs::read(x).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}

#[test]
fn eval_tsv_has_header_and_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.jsonl");
    ok_json(&["gen", "--out", p(&g)]);
    let out = ucca(&["eval", "--gold", p(&g), "--pred", p(&g), "--tsv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0].split('\t').count(), lines[1].split('\t').count());
    assert!(lines[1].split('\t').all(|f| f == "1.0000"));
}

#[test]
fn stats_json_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.jsonl");
    ok_json(&["gen", "--out", p(&g)]);
    let stats = ok_json(&["stats", "--in", p(&g)]);
    assert!(stats.is_object());
    let out = ucca(&["stats", "--in", p(&g), "--table"]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains('\t'));
}

#[test]
fn train_parse_and_restore_with_remotes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let (g, m, log, s, pr, t, r) = (
        d.join("g.jsonl"),
        d.join("m.json"),
        d.join("log.jsonl"),
        d.join("s.jsonl"),
        d.join("p.jsonl"),
        d.join("t.txt"),
        d.join("r.jsonl"),
    );
    let spec = write_spec(d, r#"{"sentences": 6, "max_tokens": 6}"#);
    ok_json(&["gen", "--spec", p(&spec), "--seed", "2", "--out", p(&g)]);
    let cfg = d.join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"max_epochs": 3, "model": {"word_dim": 8, "pos_dim": 4, "ner_dim": 4, "dep_dim": 4,
            "lstm_hidden": 8, "mlp_hidden": 8, "remote_dim": 8}}"#,
    )
    .unwrap();
    let summary = ok_json(&[
        "train",
        "--train",
        p(&g),
        "--dev",
        p(&g),
        "--config",
        p(&cfg),
        "--out",
        p(&m),
        "--log",
        p(&log),
    ]);
    assert_eq!(summary["epochs"], 3);
    assert_eq!(std::fs::read_to_string(&log).unwrap().lines().count(), 3);

    let graphs: Vec<Value> = std::fs::read_to_string(&g)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let sentences: String = graphs
        .iter()
        .map(|v| {
            format!(
                "{}\n",
                serde_json::json!({"tokens": v["tokens"], "lang": v["lang"]})
            )
        })
        .collect();
    std::fs::write(&s, sentences).unwrap();
    assert_eq!(
        ok_json(&["parse", "--model", p(&m), "--in", p(&s), "--out", p(&pr)])["sentences"],
        6
    );
    assert_eq!(std::fs::read_to_string(&pr).unwrap().lines().count(), 6);

    ok_json(&["convert", "--in", p(&g), "--out", p(&t)]);
    let restored = ok_json(&[
        "restore",
        "--in",
        p(&t),
        "--remotes-model",
        p(&m),
        "--out",
        p(&r),
    ]);
    assert_eq!(restored["sentences"], 6);
    let report = ok_json(&["eval", "--gold", p(&g), "--pred", p(&r)]);
    assert_eq!(report["primary"]["f1"], 1.0);
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = ucca(&["stats", "--in", p(&dir.path().join("nope.jsonl"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "io");
}

#[test]
fn malformed_tree_reports_its_line_as_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let t = dir.path().join("t.txt");
    std::fs::write(&t, "(ROOT (H a)\n").unwrap();
    let out = ucca(&["restore", "--in", p(&t), "--out", p(&dir.path().join("r"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = error_json(&out);
    assert_eq!(err["error"], "parse");
    assert!(err["message"].as_str().unwrap().contains("line 1"));
}

#[test]
fn bad_config_is_a_json_error() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), "{not json");
    let out = ucca(&["gen", "--spec", p(&spec), "--out", p(&dir.path().join("g"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "json");
}

#[test]
fn infeasible_spec_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let spec = write_spec(dir.path(), r#"{"min_tokens": 10, "max_tokens": 2}"#);
    let out = ucca(&["gen", "--spec", p(&spec), "--out", p(&dir.path().join("g"))]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_json(&out)["error"], "infeasible_spec");
}

#[test]
fn usage_errors_exit_two_with_json() {
    let out = ucca(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["error"], "usage");
    assert!(ucca(&["--help"]).status.success());
}
