use std::path::Path;
use std::process::{Command, Output};

fn hardy_lab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hardy-lab")).current_dir(dir).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn filtered_oracle_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = hardy_lab(dir.path(), &["oracle", "--grid", "32", "--filter", "operator,riesz", "--out", "o"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.lines().any(|l| l.starts_with("PASS riesz/")));
    assert!(!stdout.contains("semigroup/"));
    let csv = std::fs::read_to_string(dir.path().join("o/oracle.csv")).unwrap();
    assert!(csv.lines().count() > 2);
}

#[test]
fn failed_check_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("c.json"), r#"{"tolerances": {"riesz_spread": 1.0}, "corpus": {"count": 4}}"#)
        .unwrap();
    let out = hardy_lab(dir.path(), &["riesz", "--config", "c.json", "--grid", "32"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
    assert!(dir.path().join("out/riesz.json").exists());
}

#[test]
fn config_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("syntax.json"), "{\n  \"corpus\": {\"count\": 3,}\n}").unwrap();
    std::fs::write(d.join("empty.json"), "{\n  \"corpus\": {\n    \"count\": 0\n  }\n}").unwrap();
    std::fs::write(d.join("unknown.json"), r#"{"grdi": {}}"#).unwrap();

    let out = hardy_lab(d, &["assemble", "--config", "syntax.json"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("syntax.json:2:"));

    let out = hardy_lab(d, &["functional", "--config", "empty.json"]);
    assert_eq!(code(&out), 3);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("empty.json:3:") && err.contains("empty corpus"), "{err}");

    for args in [
        &["assemble", "--config", "unknown.json"][..],
        &["assemble", "--config", "missing.json"],
        &["oracle", "--filter", ""],
        &["oracle", "--filter", "nonsense"],
        &["oracle", "--grid", "64x64"],
        &["assemble", "--grid", "0"],
        &["frobnicate"],
        &["assemble", "--bogus"],
    ] {
        assert_eq!(code(&hardy_lab(d, args)), 3, "{args:?}");
    }
}

#[test]
fn help_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = hardy_lab(dir.path(), &["--help"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("--filter"));
}

#[test]
fn report_merges_previous_runs() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&hardy_lab(dir.path(), &["assemble", "--grid", "16x16", "--out", "r"])), 0);
    assert_eq!(code(&hardy_lab(dir.path(), &["carleson", "--grid", "32", "--out", "r"])), 0);
    assert_eq!(code(&hardy_lab(dir.path(), &["report", "--out", "r"])), 0);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r/summary.json")).unwrap()).unwrap();
    assert!(summary.to_string().contains("carleson"));
}
