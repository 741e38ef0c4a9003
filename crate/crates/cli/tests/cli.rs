use std::path::PathBuf;
use std::process::{Command, Output};

use fflat::report::AnalysisReport;

fn systems_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../systems")
}

fn fflat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fflat"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn sys(name: &str) -> String {
    systems_dir().join(name).to_string_lossy().into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fflat-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn example_is_flat_and_dual() {
    let o = fflat(&[&sys("paper_example.sys")]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("verdict: flat"), "{out}");
    assert!(out.contains("duality: all checks pass"), "{out}");
}

#[test]
fn iteration_limit_reports_not_converged() {
    let o = fflat(&[&sys("paper_example.sys"), "--max-iterations", "1"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("not converged"));
}

#[test]
fn non_flat_exits_cleanly() {
    let o = fflat(&[&sys("non_flat.sys"), "--decompose"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("verdict: not flat"), "{out}");
    assert!(out.contains("decomposition skipped"));
}

#[test]
fn non_rational_is_an_error() {
    let path = tmp("sin.sys");
    std::fs::write(&path, "dynamics:\n  x1+ = sin(x1) + u\n").unwrap();
    let o = fflat(&[path.to_str().unwrap()]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("sin"), "{err}");
    assert!(err.contains("hint:"), "{err}");
}

#[test]
fn missing_file_is_an_error() {
    let o = fflat(&["/nonexistent/system.sys"]);
    assert!(!o.status.success());
}

#[test]
fn json_is_deterministic_and_parses() {
    let a = tmp("a.json");
    let b = tmp("b.json");
    for p in [&a, &b] {
        let o = fflat(&[&sys("paper_example.sys"), "--decompose", "--json", p.to_str().unwrap()]);
        assert!(o.status.success());
    }
    let ja = std::fs::read(&a).unwrap();
    assert_eq!(ja, std::fs::read(&b).unwrap());
    let report: AnalysisReport = serde_json::from_slice(&ja).unwrap();
    assert!(report.verdict.flat);
    assert_eq!(report.verdict.kbar, Some(4));
    assert!(report.duality.unwrap().ok);
    assert!(report.decomposition.unwrap().complete);
}

#[test]
fn single_test_selection() {
    let p = tmp("dist.json");
    let o = fflat(&[&sys("linear_chain3.sys"), "--test", "distribution", "--json", p.to_str().unwrap()]);
    assert!(o.status.success());
    let report: AnalysisReport = serde_json::from_slice(&std::fs::read(&p).unwrap()).unwrap();
    assert!(report.distribution_test.is_some());
    assert!(report.codistribution_test.is_none());
    assert!(report.duality.is_none());
}

#[test]
fn chart_hint_is_accepted() {
    let o = fflat(&[&sys("one_step.sys"), "--chart-hint", "x1"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("verdict: flat"));
}
