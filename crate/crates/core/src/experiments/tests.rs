use super::*;

#[test]
fn command_names_round_trip() {
    for c in Command::ALL {
        assert_eq!(c.name().parse::<Command>().unwrap(), c);
        assert_eq!(serde_json::to_value(c).unwrap(), serde_json::Value::String(c.name().into()));
    }
    assert!("plot".parse::<Command>().is_err());
}

#[test]
fn checks_and_exit_codes() {
    assert!(Check::at_most("a", 1.0, 2.0).pass);
    assert!(!Check::at_most("a", f64::NAN, 2.0).pass);
    assert!(!Check::within("a", 7.0, 1.5, 6.0).pass);
    let d = Check::ratio_at_most("r", None, 25.0);
    assert!(d.pass && d.is_degenerate());
    assert!(d.line().starts_with("PASS r degenerate"));
    assert_eq!(error_exit_code(&Error::Config("x".into())), 3);
    assert_eq!(error_exit_code(&Error::InvalidParameter("x".into())), 3);
    assert_eq!(error_exit_code(&Error::KrylovNonConvergence { budget: 3 }), 4);
    assert_eq!(error_exit_code(&Error::QuadratureNonConvergence { nodes: 32, change: 1.0 }), 4);
    let o = Outcome {
        command: Command::Bmo,
        checks: vec![Check::at_most("a", 3.0, 2.0)],
        files: vec![],
        output_dir: PathBuf::new(),
    };
    assert_eq!(o.exit_code(), 2);
    assert_eq!(exit_code(&Err(Error::Config("x".into()))), 3);
}

fn small_config(dir: &Path) -> ExperimentConfig {
    let text = r#"{"grid": {"sizes": [16]}, "times": {"count": 24}, "corpus": {"count": 3, "seed": 2, "kind": "mixed"},
                   "params": {"molecules": 3, "duality_pairs": 2}}"#;
    let mut c = ExperimentConfig::from_json_str(text, "c.json").unwrap();
    c.output = dir.to_path_buf();
    c
}

#[test]
fn empty_suite_selection_is_an_error() {
    let mut c = ExperimentConfig::default();
    let err = c.apply(&Overrides { filter: Some(" , ".into()), ..Default::default() }).unwrap_err();
    assert_eq!(error_exit_code(&err), 3);
    let op = c.operator().unwrap();
    assert!(suites::run_suites(&op, &["nonsense".to_string()]).is_err());
}

#[test]
fn filter_selects_one_suite() {
    let g = crate::grid::Grid::unit_1d(16, crate::grid::Boundary::Periodic).unwrap();
    let op = crate::operator::assemble_operator(&g, &crate::coefficients::CoefficientField::identity(&g)).unwrap();
    let rows = suites::run_suites(&op, &["decomposition".to_string()]).unwrap();
    assert!(!rows.is_empty() && rows.iter().all(|r| r.suite == "decomposition"));
    assert!(rows.iter().all(|r| r.pass), "{rows:?}");
}

#[test]
fn constant_corpus_is_degenerate_for_bmo() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path());
    c.corpus.kind = corpus::CorpusKind::Constant;
    let out = run(Command::Carleson, &c).unwrap();
    assert!(out.checks.iter().all(|k| k.is_degenerate()), "{:?}", out.checks);
    let body = std::fs::read_to_string(dir.path().join("carleson.csv")).unwrap();
    assert!(body.lines().skip(1).all(|l| l.contains("degenerate")), "{body}");
}

#[test]
fn report_merges_csvs() {
    let dir = tempfile::tempdir().unwrap();
    let c = small_config(dir.path());
    assert!(run(Command::Report, &c).is_err());
    let a = run(Command::Assemble, &c).unwrap();
    assert!(a.pass(), "{:?}", a.checks);
    run(Command::Functional, &c).unwrap();
    let r = run(Command::Report, &c).unwrap();
    assert!(r.pass());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(v["tables"]["functional"]["rows"], 3);
    assert!(v["commands"]["assemble"]["pass"].as_bool().unwrap());
}

#[test]
fn constant_corpus_bmo_command_reports_zero_norms() {
    let dir = tempfile::tempdir().unwrap();
    let mut c = small_config(dir.path());
    c.corpus.kind = corpus::CorpusKind::Constant;
    let out = run(Command::Bmo, &c).unwrap();
    let body = std::fs::read_to_string(dir.path().join("bmo.csv")).unwrap();
    for line in body.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(cells[3].parse::<f64>().unwrap(), 0.0);
    }
    let degenerate: Vec<&Check> = out.checks.iter().filter(|k| k.name.ends_with("spread")).collect();
    assert!(!degenerate.is_empty() && degenerate.iter().all(|k| k.is_degenerate()));
}
