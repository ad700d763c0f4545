use conflictsim::bus::{EventLog, LogHeader};
use serde_json::{json, Value};
use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_conflictsim"))
        .args(args)
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn sample_catalog() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/catalog.sample.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn catalog_validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.json", &sample_catalog().to_string());
    let out = cli(&["catalog", "validate", &good]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).starts_with("valid: scenario"));

    let mut catalog = sample_catalog();
    let parts = catalog["parts"].as_array_mut().unwrap();
    let victim = parts.iter().position(|p| p.get("variantCount").is_none()).unwrap();
    parts.remove(victim);
    let holed = write(dir.path(), "holed.json", &catalog.to_string());
    let out = cli(&["catalog", "validate", &holed]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("uncovered cell"), "{}", stderr(&out));

    let broken = write(dir.path(), "broken.json", "{ not json");
    assert_eq!(code(&cli(&["catalog", "validate", &broken])), 1);

    let missing = dir.path().join("absent.json");
    assert_eq!(code(&cli(&["catalog", "validate", missing.to_str().unwrap()])), 2);
}

#[test]
fn run_rejects_bad_arguments() {
    let out = cli(&["run", "--policy", "telepathy", "--episodes", "1"]);
    assert_eq!(code(&out), 1);
    let out = cli(&["run", "--start", "9,1,1", "--episodes", "1"]);
    assert_eq!(code(&out), 1);
}

#[test]
fn run_writes_stats_and_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let stats = dir.path().join("stats.json");
    let csv = dir.path().join("csv");
    let out = cli(&[
        "run",
        "--policy",
        "uniform",
        "--episodes",
        "20",
        "--seed",
        "3",
        "--out",
        stats.to_str().unwrap(),
        "--csv-dir",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let parsed: Value = serde_json::from_str(&std::fs::read_to_string(&stats).unwrap()).unwrap();
    assert_eq!(parsed["episodes"], 20);
    let files: Vec<_> = std::fs::read_dir(&csv).unwrap().collect();
    assert!(!files.is_empty());
    for f in files {
        let text = std::fs::read_to_string(f.unwrap().path()).unwrap();
        assert!(text.lines().count() > 1);
    }
}

#[test]
fn replay_edge_cases() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.ndjson");
    EventLog::new(LogHeader::new("e", "c", Value::Null))
        .save(&empty)
        .unwrap();
    let out = cli(&["replay", empty.to_str().unwrap(), "--speed", "inf"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout(&out), "");

    let mut text = std::fs::read_to_string(&empty).unwrap();
    text.push_str("{ this is not an event\n");
    let corrupt = write(dir.path(), "corrupt.ndjson", &text);
    let out = cli(&["replay", &corrupt, "--speed", "inf"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

#[test]
fn record_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let lines = [
        json!({"rating": {"taskFocus": true, "relationship": false, "phase": 1}}),
        json!({"rating": {"taskFocus": false, "relationship": true, "phase": 2}}),
        json!({"rating": {"taskFocus": true, "relationship": true, "phase": 2}}),
    ];
    let script: String = lines.iter().map(|l| format!("{l}\n")).collect();
    let script = write(dir.path(), "script.ndjson", &script);
    let log = dir.path().join("log.ndjson");
    let out = cli(&[
        "record",
        &script,
        "--mode",
        "woz",
        "--seed",
        "9",
        "--out",
        log.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let out = cli(&["replay", log.to_str().unwrap(), "--verify"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(stdout(&out).trim(), "identical: 3 student commands reproduced");

    let out = cli(&["replay", log.to_str().unwrap(), "--speed", "inf"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("student.command"));

    // A rating in auto mode is rejected with the offending line number.
    let out = cli(&["record", &script, "--mode", "auto", "--out", log.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("script line 1"), "{}", stderr(&out));

    let bad = write(dir.path(), "bad.ndjson", "{\"dance\": 1}\n");
    let out = cli(&["record", &bad, "--out", log.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
}
