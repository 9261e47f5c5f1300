use std::path::PathBuf;
use std::process::{Command, Output};

fn corpus(name: &str) -> String {
    let mut p = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    p.push("corpus");
    p.push(format!("{name}.def"));
    p.to_string_lossy().into_owned()
}

fn defcal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_defcal"))
        .args(args)
        .env_remove("DEFCAL_MAX_STATES")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_prints_result() {
    let o = defcal(&["run", &corpus("delegate_forward")]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("terminated: 10"));
}

#[test]
fn deadlock_fails_only_when_termination_expected() {
    let f = corpus("cycle");
    assert_eq!(defcal(&["run", &f]).status.code(), Some(0));
    let o = defcal(&["run", "--expect-terminate", &f]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).starts_with("deadlocked"));
}

#[test]
fn typing_depends_on_mode() {
    let f = corpus("sync_forward_wait");
    let o = defcal(&["check", &f]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("T-FORWARD"));
    assert_eq!(
        defcal(&["--mode", "flexible", "check", &f]).status.code(),
        Some(0)
    );
}

#[test]
fn usage_and_io_errors() {
    assert_eq!(
        defcal(&["check", "/nonexistent/x.def"]).status.code(),
        Some(2)
    );
    assert_eq!(defcal(&["frobnicate"]).status.code(), Some(2));
    let o = defcal(&[
        "run",
        "--policy",
        "round-robin",
        "--seed",
        "3",
        &corpus("mixed"),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn truncation_is_an_error_only_when_strict() {
    let f = corpus("mixed");
    assert_eq!(
        defcal(&["explore", "--max-states", "5", &f]).status.code(),
        Some(0)
    );
    let o = defcal(&["explore", "--max-states", "5", "--strict-bounds", &f]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("truncated: true"));
}

#[test]
fn max_states_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_defcal"))
        .args(["explore", "--strict-bounds", &corpus("mixed")])
        .env("DEFCAL_MAX_STATES", "5")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn fwdelim_writes_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("elim.def");
    let o = defcal(&[
        "-o",
        out.to_str().unwrap(),
        "fwdelim",
        &corpus("delegate_forward"),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(!text.contains("forward*"));
    // The written program is itself accepted by the tool.
    let o = defcal(&["--dialect", "def", "run", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("terminated: 10"));
}

#[test]
fn bisim_against_self_elimination() {
    let o = defcal(&["bisim", "--check-r", &corpus("mixed")]);
    assert_eq!(o.status.code(), Some(0));
    let s = stdout(&o);
    assert!(s.starts_with("bisimilar"));
    assert!(s.contains("relation R: ok"));
}

#[test]
fn bisim_detects_mutant() {
    let o = defcal(&[
        "--format",
        "json",
        "bisim",
        &corpus("checked"),
        "--against",
        &corpus("mutants/changed_constant"),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["verdict"], "not_bisimilar");
    assert!(!v["witness"].as_array().unwrap().is_empty());
}
