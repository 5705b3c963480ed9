mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::*;
use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eido-idx")).args(args).output().unwrap()
}

fn lines(o: &Output) -> Vec<Value> {
    String::from_utf8_lossy(&o.stdout).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn ingest_case_study(log: &Path) -> Output {
    let (a, b) = (fixture("nws_flood_warning.json"), fixture("news_report.json"));
    run(&["--log", s(log), "ingest", s(&a), s(&b)])
}

#[test]
fn ingest_then_query() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    let o = ingest_case_study(&log);
    assert_eq!(o.status.code(), Some(0));
    let d = lines(&o);
    assert_eq!(d[0]["decision"], "NewIncident");
    assert_eq!(d[1]["decision"], "LinkTo");
    assert_eq!(d[0]["incidentId"], d[1]["incidentId"]);

    let id = d[0]["incidentId"].as_str().unwrap();
    let o = run(&["--log", s(&log), "composite", id]);
    assert_eq!(o.status.code(), Some(0));
    let view = &lines(&o)[0];
    assert_eq!(view["contributingEidoIds"].as_array().unwrap().len(), 2);

    assert_eq!(run(&["--log", s(&log), "composite", "INC-404"]).status.code(), Some(3));
    assert_eq!(run(&["--log", s(&log), "check-log"]).status.code(), Some(0));
    assert_eq!(run(&["--log", s(&log), "replay"]).status.code(), Some(0));
}

#[test]
fn zero_inputs_is_empty_success() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["--log", s(&dir.path().join("l.jsonl")), "ingest"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
}

#[test]
fn record_errors_do_not_fail_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"eidoId\": 5}").unwrap();
    let good = fixture("minimal.json");
    let o = run(&["--log", s(&dir.path().join("l.jsonl")), "ingest", s(&bad), s(&good)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(lines(&o).len(), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("1 input record(s) failed"));
}

#[test]
fn replay_with_other_tau_diverges_only_if_decisions_change() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    ingest_case_study(&log);
    assert_eq!(run(&["--log", s(&log), "--tau", "0.9", "replay"]).status.code(), Some(5));
    assert_eq!(run(&["--log", s(&log), "--tau", "0.3", "replay"]).status.code(), Some(0));
    let o = run(&["--log", s(&log), "--weights", "1,0,0", "replay"]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn corrupt_log_exit_codes_and_no_writes() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    ingest_case_study(&log);
    let mut text = std::fs::read_to_string(&log).unwrap();
    text = text.replacen("\"sequence\":2", "\"sequence\":7", 1);
    std::fs::write(&log, &text).unwrap();
    assert_eq!(run(&["--log", s(&log), "check-log"]).status.code(), Some(2));
    let o = run(&["--log", s(&log), "ingest", s(&fixture("minimal.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(std::fs::read_to_string(&log).unwrap(), text);
}

#[test]
fn flatten_and_compose() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("flat");
    let src = fixture("nws_flood_warning.json");
    assert_eq!(run(&["flatten", s(&src), "--out", s(&out)]).status.code(), Some(0));
    let o = run(&["compose", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let original: Value = serde_json::from_str(&fixture_text("nws_flood_warning.json")).unwrap();
    let original = eido_idx::model::document_to_value(&eido_idx::model::document_from_value(&original).unwrap());
    deep_equal_modulo_ids(&original, &lines(&o)[0]).unwrap();
}

#[test]
fn compose_dangling_link_names_the_column() {
    let dir = tempfile::tempdir().unwrap();
    let rows = dir.path().join("rows.jsonl");
    std::fs::write(
        &rows,
        concat!(
            r#"{"featureKind":"incident","eidoId":"E1","componentId":"incident-1","issuedTimestamp":"2026-01-01T00:00:00Z"}"#,
            "\n",
            r#"{"featureKind":"note","eidoId":"E1","componentId":"N1","notesActionComments":"x","noteTimestamp":"2026-01-01T00:00:00Z","locationReference":"L9"}"#,
            "\n"
        ),
    )
    .unwrap();
    let o = run(&["compose", s(&rows)]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("locationReference"));
}

#[test]
fn usage_and_config_errors_exit_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--weights", "1,2", "replay"]).status.code(), Some(1));
    assert_eq!(run(&["--config", "/no/such.toml", "ingest"]).status.code(), Some(1));
    assert_eq!(run(&["--tau", "3", "ingest"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[correlation]\nbogus = 1\n").unwrap();
    assert_eq!(run(&["--config", s(&cfg), "ingest"]).status.code(), Some(1));
}

#[test]
fn score_does_not_commit() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("log.jsonl");
    ingest_case_study(&log);
    let before = std::fs::read(&log).unwrap();
    let o = run(&["--log", s(&log), "score", s(&fixture("news_report.json"))]);
    assert_eq!(o.status.code(), Some(0));
    let v = &lines(&o)[0];
    assert_eq!(v["decision"], "LinkTo");
    assert!(v["ranked"][0]["sigma"].as_f64().unwrap() > 0.55);
    assert_eq!(std::fs::read(&log).unwrap(), before);
}

#[test]
fn cad_csv_inputs_with_format_override() {
    let dir = tempfile::tempdir().unwrap();
    let copy = dir.path().join("export.txt");
    std::fs::copy(fixture("cad_sample.csv"), &copy).unwrap();
    assert_eq!(run(&["ingest", s(&copy)]).status.code(), Some(0));
    assert!(lines(&run(&["ingest", s(&copy)])).is_empty());
    let o = run(&["--format", "csv", "ingest", s(&copy)]);
    assert_eq!(lines(&o).len(), 3);
}
