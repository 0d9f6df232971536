use std::path::Path;
use std::process::{Command, Output};

use daoclass_core::testkit::FixtureSet;
use serde_json::Value;

fn daoclass(store: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_daoclass"))
        .arg("--store")
        .arg(store)
        .args(args)
        .env_remove("OPENAI_API_KEY")
        .output()
        .expect("spawn daoclass")
}

fn last_json(out: &Output) -> Value {
    let stdout = String::from_utf8_lossy(&out.stdout);
    let line = stdout.lines().last().expect("summary line");
    serde_json::from_str(line).expect("summary is JSON")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = daoclass(dir.path(), &["classify", "--frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_gold_file_fails_without_touching_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");
    let out = daoclass(&store, &["evaluate", "--gold", "/nonexistent/gold.csv"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
    assert!(!store.exists());
}

#[test]
fn evaluate_without_any_gold_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = daoclass(&dir.path().join("store"), &["evaluate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn live_provider_without_key_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let paths = FixtureSet::build(3, 3, 1).write_to(dir.path()).unwrap();
    let out = daoclass(
        &dir.path().join("store"),
        &["classify", "--input", s(&paths.proposals)],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("OPENAI_API_KEY"));
}

#[test]
fn classify_evaluate_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let paths = FixtureSet::build(100, 95, 7).write_to(dir.path()).unwrap();
    let store = dir.path().join("store");

    let out = daoclass(
        &store,
        &[
            "classify",
            "--input",
            s(&paths.proposals),
            "--provider",
            "replay",
            "--replay-file",
            s(&paths.replay),
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary = last_json(&out);
    assert_eq!(summary["classified"], 100);
    assert_eq!(summary["failed"], 0);
    assert_eq!(summary["cached"], 0);

    let report = dir.path().join("report.json");
    let confusion = dir.path().join("confusion.csv");
    let out = daoclass(
        &store,
        &[
            "evaluate",
            "--gold",
            s(&paths.gold),
            "--report",
            s(&report),
            "--confusion-csv",
            s(&confusion),
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("0.9500"), "{stdout}");
    assert_eq!(last_json(&out)["ending_condition_met"], true);
    let parsed: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(parsed["correct"], 95);
    assert_eq!(
        std::fs::read_to_string(&confusion).unwrap().lines().count(),
        8
    );

    // stored gold is reused
    let out = daoclass(&store, &["evaluate"]);
    assert!(out.status.success());
    assert_eq!(last_json(&out)["correct"], 95);

    let stats = dir.path().join("stats.csv");
    let out = daoclass(&store, &["report", "--out", s(&stats)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(stats.exists());
    assert!(dir.path().join("stats_monthly.csv").exists());
}

#[test]
fn taxonomy_show_prints_seven_categories() {
    let dir = tempfile::tempdir().unwrap();
    let out = daoclass(dir.path(), &["taxonomy", "show"]);
    assert!(out.status.success());
    let summary = last_json(&out);
    assert_eq!(summary["version"], 7);
    assert_eq!(summary["categories"], 7);
    let stdout = String::from_utf8_lossy(&out.stdout);
    for code in ["TAM", "PRM", "PFU", "GAFM", "BAWM", "PED", "MISC"] {
        assert!(stdout.contains(code), "{code}");
    }
}
