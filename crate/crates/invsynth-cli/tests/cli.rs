//! End-to-end runs of the binary over the corpus.

use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

fn corpus(file: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(file)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_invsynth")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("terminated by signal")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn check_accepts_the_strengthened_candidate() {
    let spec = corpus("sorted_copy.tcs");
    let cand = corpus("sorted_copy.candidate");
    let out = run(&["check", spec.to_str().unwrap(), "--candidate", cand.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
}

#[test]
fn check_rejects_the_bare_property() {
    let out = run(&["check", corpus("sorted_copy.tcs").to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{}", stdout(&out));
    assert!(stdout(&out).contains("consecution"), "{}", stdout(&out));
}

#[test]
fn malformed_spec_is_a_spec_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.tcs");
    std::fs::write(&bad, "version 1\nsignature\n  parameter x : nosuchsort\nend\n").unwrap();
    for cmd in ["check", "synth", "elim"] {
        let out = run(&[cmd, bad.to_str().unwrap()]);
        assert_eq!(code(&out), 64, "{cmd}");
        assert!(!out.stderr.is_empty() || !out.stdout.is_empty());
    }
    let out = run(&["check", dir.path().join("missing.tcs").to_str().unwrap()]);
    assert_ne!(code(&out), 0);
}

#[test]
fn synth_finds_the_two_step_invariant() {
    let out = run(&["synth", corpus("step_by_two.tcs").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("invariant after"));
}

#[test]
fn drift_counter_exhausts_its_budget_unless_z_is_eliminated() {
    let spec = corpus("drift_counter.tcs");
    let out = run(&["synth", spec.to_str().unwrap(), "--max-iters", "6"]);
    assert_eq!(code(&out), 20, "{}", stdout(&out));
    assert!(stdout(&out).contains("growing"), "{}", stdout(&out));
    let out = run(&["synth", spec.to_str().unwrap(), "--eliminate-const", "z"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
}

#[test]
fn records_format_is_one_json_object_per_line() {
    let out = run(&["synth", corpus("step_by_two.tcs").to_str().unwrap(), "--format", "records"]);
    assert_eq!(code(&out), 0);
    let lines: Vec<serde_json::Value> = stdout(&out).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let (last, iters) = lines.split_last().unwrap();
    assert_eq!(last["record"], "report");
    assert_eq!(last["exit_code"], 0);
    assert!(last["spec_digest"].as_str().unwrap().starts_with("sha256:"));
    assert!(!iters.is_empty());
    assert!(iters.iter().all(|r| r["record"] == "iteration" && r["data"]["iteration"].is_u64()));
    assert!(!stdout(&out).contains('\u{1b}'));
}

#[test]
fn elim_prints_the_bridge_constraint() {
    let out = run(&["elim", corpus("monotone_bridge.tcs").to_str().unwrap(), "--keep", "f,h,c", "--verify"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains("forall"), "{}", stdout(&out));
}

#[test]
fn qe_projects_a_constant() {
    let out = run(&["qe", corpus("step_by_two.tcs").to_str().unwrap(), "x <= y & y <= x + 1 & x = 2 * y", "--vars", "x"]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(stdout(&out).contains('y'), "{}", stdout(&out));
}

/// Every dumped script, fed back to the solver, gives the verdict recorded
/// in its first line.
#[test]
fn emitted_scripts_replay_to_their_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "synth",
        corpus("step_by_two.tcs").to_str().unwrap(),
        "--emit",
        "smt2",
        "--emit",
        "trace",
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stdout(&out));
    assert!(out_dir.join("trace.jsonl").exists());
    let mut replayed = 0;
    for entry in std::fs::read_dir(out_dir.join("smt2")).unwrap() {
        let path = entry.unwrap().path();
        let text = std::fs::read_to_string(&path).unwrap();
        let expected = text.lines().next().unwrap().strip_prefix("; expected: ").unwrap().trim().to_string();
        if expected == "unknown" {
            continue;
        }
        let solver = std::env::var("INVSYNTH_SOLVER").unwrap_or_else(|_| "z3".into());
        let got = Command::new(solver).arg(&path).stdout(Stdio::piped()).output().unwrap();
        let first = String::from_utf8_lossy(&got.stdout).lines().next().unwrap_or("").trim().to_string();
        assert_eq!(first, expected, "{}", path.display());
        replayed += 1;
    }
    assert!(replayed > 0);
}
