use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use indeterminacy::*;
use serde_json::Value;

fn indet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_indet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut args = vec![
        "simulate",
        "--items",
        "60",
        "--seed",
        "4",
        "--out",
        p(&path),
    ];
    if !extra.contains(&"--pi") {
        args.extend(["--pi", "0.4"]);
    }
    args.extend(extra);
    let out = indet(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    path
}

/// Ten items over {Yes, No}: six gold matches; four items flagged.
fn ten_item_corpus(dir: &Path) -> PathBuf {
    let mut text = String::from("{\"_alphabet\":[\"Yes\",\"No\"]}\n");
    for i in 0..10 {
        let llm = if i < 6 { "Yes" } else { "No" };
        let flag = if i >= 6 {
            ",\"indeterminate\":true"
        } else {
            ",\"indeterminate\":false"
        };
        text.push_str(&format!(
            "{{\"item_id\":\"q{i}\",\"ratings\":[{{\"rater_id\":\"a\",\"response\":\"Yes\"}}],\"llm_response\":\"{llm}\"{flag}}}\n"
        ));
    }
    let path = dir.join("ten.jsonl");
    fs::write(&path, text).unwrap();
    path
}

#[test]
fn simulate_writes_corpus_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    let out = indet(&[
        "simulate",
        "--items",
        "10",
        "--pi",
        "0",
        "--seed",
        "1",
        "--out",
        p(&path),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = stdout_json(&out);
    assert_eq!(summary["n_items"], 10);
    assert_eq!(summary["realized_pi"], 0.0);

    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 11, "header plus ten items");
    let corpus = parse_corpus(text.as_bytes()).unwrap();
    assert!(corpus
        .items()
        .iter()
        .all(|i| i.vrs.as_ref().unwrap().is_determinate()));
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = simulate(dir.path(), "a.jsonl", &[]);
    let b = simulate(dir.path(), "b.jsonl", &["--threads", "1"]);
    assert_eq!(fs::read(a).unwrap(), fs::read(b).unwrap());
}

#[test]
fn simulate_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("x.jsonl");
    let out = indet(&[
        "simulate",
        "--pi",
        "1.5",
        "--seed",
        "1",
        "--out",
        p(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--pi"));
    assert!(out.stdout.is_empty());

    let out = indet(&[
        "simulate",
        "--pi",
        "0.5",
        "--labels",
        "2",
        "--seed",
        "1",
        "--out",
        p(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--vrs-max"), "{}", stderr(&out));
    assert!(!out_path.exists());
}

#[test]
fn simulate_unwritable_path() {
    let out = indet(&[
        "simulate",
        "--pi",
        "0.5",
        "--seed",
        "1",
        "--out",
        "/nonexistent-dir/x.jsonl",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/nonexistent-dir/x.jsonl"));
}

#[test]
fn evaluate_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let path = simulate(dir.path(), "c.jsonl", &[]);
    let out = indet(&["evaluate", "--corpus", p(&path), "--require-vrs"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json = stdout_json(&out);
    let corpus = parse_corpus(fs::read(&path).unwrap().as_slice()).unwrap();
    let report = evaluate(&corpus).unwrap();
    assert_eq!(
        json["gold_concurrence"].as_f64().unwrap(),
        report.gold_concurrence
    );
    assert_eq!(
        json["true_performance"].as_f64().unwrap(),
        report.true_performance.unwrap()
    );
    assert_eq!(json["gap"].as_f64().unwrap(), report.gap.unwrap());
    assert_eq!(json["n_items"], 60);
    for key in ["mean_agreement", "n_indeterminate_known"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn evaluate_without_vrs() {
    let dir = tempfile::tempdir().unwrap();
    let path = ten_item_corpus(dir.path());
    let out = indet(&["evaluate", "--corpus", p(&path)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json = stdout_json(&out);
    assert!(json.get("true_performance").is_none());
    assert_eq!(json["gold_concurrence"], 0.6);
    assert_eq!(json["n_indeterminate_known"], 4);

    let out = indet(&["evaluate", "--corpus", p(&path), "--require-vrs"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("q0"));
}

#[test]
fn evaluate_data_errors() {
    let out = indet(&["evaluate", "--corpus", "/no/such/file.jsonl"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("/no/such/file.jsonl"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    fs::write(
        &bad,
        "{\"item_id\":\"a\",\"ratings\":[{\"rater_id\":\"r\",\"response\":\"X\"}],\"llm_response\":\"Y\"}\n{oops\n",
    )
    .unwrap();
    let out = indet(&["evaluate", "--corpus", p(&bad)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));

    let mismatch = dir.path().join("mismatch.jsonl");
    fs::write(
        &mismatch,
        "{\"item_id\":\"a\",\"ratings\":[{\"rater_id\":\"r\",\"response\":\"X\"}],\"llm_response\":\"Y\",\"vrs\":[\"X\"],\"indeterminate\":true}\n",
    )
    .unwrap();
    let out = indet(&["evaluate", "--corpus", p(&mismatch)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("flag/vrs mismatch"));
}

#[test]
fn bound_prevalence_and_partition() {
    let dir = tempfile::tempdir().unwrap();
    let path = ten_item_corpus(dir.path());
    let out = indet(&["bound", "prevalence", "--corpus", p(&path), "--pi", "0.3"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json = stdout_json(&out);
    assert_eq!(json["method"], "prevalence");
    assert_eq!(json["lower"], 0.6);
    assert_eq!(json["upper"], 0.9);
    assert_eq!(json["assumptions"][0], "gold-in-vrs");

    let out = indet(&["bound", "partition", "--corpus", p(&path), "--flags"]);
    let json = stdout_json(&out);
    assert_eq!(
        (json["lower"].as_f64(), json["upper"].as_f64()),
        (Some(0.6), Some(1.0))
    );
    let tags: Vec<_> = json["assumptions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(tags.contains(&"partition-superset"));
    assert!(tags.contains(&"partition-source:flags"));

    let out = indet(&[
        "bound",
        "partition",
        "--corpus",
        p(&path),
        "--threshold",
        "0.7",
    ]);
    let json = stdout_json(&out);
    assert_eq!(
        json["lower"], json["upper"],
        "unanimous ratings: nothing below tau"
    );
}

#[test]
fn bound_oracle_on_determinate_corpus_is_a_point() {
    let dir = tempfile::tempdir().unwrap();
    let path = simulate(dir.path(), "det.jsonl", &["--pi", "0"]);
    let out = indet(&["bound", "partition", "--corpus", p(&path), "--oracle"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json = stdout_json(&out);
    assert_eq!(json["lower"], json["upper"]);

    let out = indet(&["bound", "mixed", "--corpus", p(&path), "--oracle"]);
    let json = stdout_json(&out);
    assert_eq!(json["method"], "mixed");
    assert_eq!(json["lower"], json["upper"]);
}

#[test]
fn bound_flag_exclusivity() {
    let dir = tempfile::tempdir().unwrap();
    let path = ten_item_corpus(dir.path());
    let audit = dir.path().join("audit.jsonl");
    fs::write(&audit, "{\"item_id\":\"q0\",\"indeterminate\":false}\n").unwrap();
    let cases: [&[&str]; 5] = [
        &[
            "bound",
            "prevalence",
            "--corpus",
            p(&path),
            "--pi",
            "0.3",
            "--audit",
            p(&audit),
            "--alpha",
            "0.05",
        ],
        &["bound", "prevalence", "--corpus", p(&path)],
        &[
            "bound",
            "prevalence",
            "--corpus",
            p(&path),
            "--audit",
            p(&audit),
        ],
        &[
            "bound",
            "partition",
            "--corpus",
            p(&path),
            "--oracle",
            "--flags",
        ],
        &["bound", "partition", "--corpus", p(&path)],
    ];
    for args in cases {
        let out = indet(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
        assert!(out.stdout.is_empty());
    }
    let out = indet(&["bound", "partition", "--corpus", p(&path), "--oracle"]);
    assert_eq!(out.status.code(), Some(1), "corpus has no vrs");
    let out = indet(&[
        "bound",
        "partition",
        "--corpus",
        p(&path),
        "--threshold",
        "0.5",
        "--agreement-source",
        "llm",
    ]);
    assert_eq!(out.status.code(), Some(1), "corpus has no llm_samples");
}

#[test]
fn bound_prevalence_from_audit() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::from("{\"_alphabet\":[\"A\",\"B\"]}\n");
    for i in 0..20 {
        let llm = if i < 16 { "A" } else { "B" };
        text.push_str(&format!(
            "{{\"item_id\":\"i{i}\",\"ratings\":[{{\"rater_id\":\"r\",\"response\":\"A\"}}],\"llm_response\":\"{llm}\"}}\n"
        ));
    }
    let corpus = dir.path().join("c.jsonl");
    fs::write(&corpus, text).unwrap();
    let audit = dir.path().join("a.jsonl");
    let lines: String = (0..20)
        .map(|i| format!("{{\"item_id\":\"i{i}\",\"indeterminate\":false}}\n"))
        .collect();
    fs::write(&audit, lines).unwrap();
    let out = indet(&[
        "bound",
        "prevalence",
        "--corpus",
        p(&corpus),
        "--audit",
        p(&audit),
        "--alpha",
        "0.05",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let json = stdout_json(&out);
    assert_eq!(json["lower"], 0.8);
    assert!((json["upper"].as_f64().unwrap() - 0.9391).abs() < 1e-4);
    assert!(json["assumptions"]
        .as_array()
        .unwrap()
        .iter()
        .any(|t| t == "audit-confidence:0.95"));
}

#[test]
fn audit_workflow() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = simulate(dir.path(), "c.jsonl", &[]);
    let sheet_a = dir.path().join("a.jsonl");
    let sheet_b = dir.path().join("b.jsonl");
    for sheet in [&sheet_a, &sheet_b] {
        let out = indet(&[
            "audit",
            "draw",
            "--corpus",
            p(&corpus),
            "--n",
            "20",
            "--seed",
            "7",
            "--out",
            p(sheet),
        ]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let text = fs::read_to_string(&sheet_a).unwrap();
    assert_eq!(text, fs::read_to_string(&sheet_b).unwrap());
    assert_eq!(text.lines().count(), 20);
    assert!(text.lines().all(|l| l.ends_with("\"indeterminate\":null}")));

    // Unfilled worksheets are rejected.
    let out = indet(&[
        "audit",
        "estimate",
        "--audit",
        p(&sheet_a),
        "--alpha",
        "0.05",
    ]);
    assert_eq!(out.status.code(), Some(1));

    let filled = text.replace("null", "false");
    fs::write(&sheet_a, &filled).unwrap();
    let out = indet(&[
        "audit",
        "estimate",
        "--audit",
        p(&sheet_a),
        "--alpha",
        "0.05",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let est = stdout_json(&out);
    assert_eq!(est["n_audited"], 20);
    assert_eq!(est["n_indeterminate"], 0);
    assert_eq!(est["point"], 0.0);
    assert_eq!(est["alpha"], 0.05);
    assert!((est["upper_confidence"].as_f64().unwrap() - 0.1391).abs() < 1e-4);

    let merged = dir.path().join("merged.jsonl");
    let out = indet(&[
        "audit",
        "apply",
        "--corpus",
        p(&corpus),
        "--audit",
        p(&sheet_a),
        "--out",
        p(&merged),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let merged = parse_corpus(fs::read(&merged).unwrap().as_slice()).unwrap();
    assert_eq!(
        merged
            .items()
            .iter()
            .filter(|i| i.indeterminate_flag.is_some())
            .count(),
        20
    );

    fs::write(&sheet_b, "{\"item_id\":\"nope\",\"indeterminate\":true}\n").unwrap();
    let out = indet(&[
        "audit",
        "apply",
        "--corpus",
        p(&corpus),
        "--audit",
        p(&sheet_b),
        "--out",
        p(&dir.path().join("m2.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("nope"));

    let out = indet(&[
        "audit",
        "draw",
        "--corpus",
        p(&corpus),
        "--n",
        "61",
        "--seed",
        "7",
        "--out",
        p(&sheet_b),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("s.csv");
    let out = indet(&[
        "sweep",
        "--pi-grid",
        "0:0.8:0.4",
        "--replicates",
        "2",
        "--items",
        "80",
        "--seed",
        "3",
        "--out",
        p(&csv_path),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = stdout_json(&out);
    assert_eq!(summary["rows"], 6);
    let pis: Vec<f64> = summary["grid"]
        .as_array()
        .unwrap()
        .iter()
        .map(|g| g["pi"].as_f64().unwrap())
        .collect();
    assert_eq!(pis, [0.0, 0.4, 0.8]);

    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header.join(","), "pi,replicate,seed,n_items,realized_pi,gold_concurrence,true_performance,prev_lower,prev_upper,part_lower,part_upper,heur_lower,heur_upper,mean_agreement");
    let rows: Vec<_> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 6);
    let keys: Vec<(String, String)> = rows
        .iter()
        .map(|r| (r[0].to_string(), r[1].to_string()))
        .collect();
    assert_eq!(keys[0], ("0.0".into(), "0".into()));
    assert_eq!(keys[5], ("0.8".into(), "1".into()));

    let out = indet(&[
        "sweep",
        "--pi-grid",
        "0:0.8",
        "--seed",
        "3",
        "--out",
        p(&csv_path),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = indet(&[
        "sweep",
        "--pi-grid",
        "0.1",
        "--seed",
        "3",
        "--out",
        "/nonexistent-dir/s.csv",
        "--items",
        "10",
        "--replicates",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
}
