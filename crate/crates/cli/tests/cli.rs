//! End-to-end tests of the `atlr` binary: exit codes, deterministic output,
//! witness files.

use std::path::Path;
use std::process::{Command, Output};

const LOCK: &str = "\
agents: 1 2
actions 1: u n
actions 2: w
states: locked unlocked
label locked:
label unlocked: unlocked_p
trans locked: u w -> unlocked
trans locked: n w -> locked
trans unlocked: u w -> unlocked
trans unlocked: n w -> unlocked
";

const XOR_FORMULA: &str =
    "split 1 -> {a,b} . (~<<a>> X unlocked_p & ~<<b>> X unlocked_p & <<a,b>> X unlocked_p)";

fn atlr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_atlr"))
        .args(args)
        .output()
        .expect("failed to run atlr")
}

fn write_lock(dir: &Path) -> String {
    let path = dir.join("lock.cgm");
    std::fs::write(&path, LOCK).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn xor_example_emits_witness() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_lock(dir.path());
    let wpath = dir.path().join("witness.cgm");
    let out = atlr(&[
        "check",
        "--model",
        &model,
        "--state",
        "locked",
        "--formula",
        XOR_FORMULA,
        "--witness",
        wpath.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("state locked: true"), "{stdout}");
    assert!(stdout.contains("witness: written to"), "{stdout}");

    // the emitted file re-loads and re-verifies against the base model
    let base = atlr_core::load_model_str(LOCK).unwrap();
    let text = std::fs::read_to_string(&wpath).unwrap();
    let wf = atlr_core::parse_witness(&text).unwrap();
    let (homs, final_model) = atlr_core::resolve_witness(&base, &wf).unwrap();
    assert_eq!(homs.len(), 1);
    let locked = final_model.state_index("locked").unwrap();
    let body = atlr_core::parse_formula(
        "~<<a>> X unlocked_p & ~<<b>> X unlocked_p & <<a,b>> X unlocked_p",
        &final_model.agents().iter().cloned().collect(),
    )
    .unwrap();
    let sat = atlr_core::check_atl(&final_model, &body).unwrap();
    assert!(sat.contains(locked));
}

#[test]
fn output_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_lock(dir.path());
    let run = || {
        let out = atlr(&["check", "--model", &model, "--formula", XOR_FORMULA, "--mode", "both"]);
        (out.status.code(), String::from_utf8(out.stdout).unwrap())
    };
    let (c1, s1) = run();
    let (c2, s2) = run();
    assert_eq!(c1, Some(0));
    assert_eq!(c1, c2);
    assert_eq!(s1, s2, "stdout differs between runs");
    assert!(s1.contains("agree"));
}

#[test]
fn semantic_false_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_lock(dir.path());
    let out = atlr(&[
        "check",
        "--model",
        &model,
        "--state",
        "locked",
        "--formula",
        "split 1 -> {a} . ~<<a>> X unlocked_p",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("state locked: false"), "{stdout}");
}

#[test]
fn malformed_model_exits_two_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cgm");
    std::fs::write(&path, "agents: 1\nactions 1 u n\n").unwrap();
    let out = atlr(&["check", "--model", path.to_str().unwrap(), "--formula", "true"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("line 2"), "{stderr}");
}

#[test]
fn missing_transition_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("partial.cgm");
    let partial: String = LOCK.lines().take(9).collect::<Vec<_>>().join("\n");
    std::fs::write(&path, partial).unwrap();
    let out = atlr(&["check", "--model", path.to_str().unwrap(), "--formula", "true"]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("missing transition"), "{stderr}");
}

#[test]
fn formula_syntax_error_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_lock(dir.path());
    let out = atlr(&["check", "--model", &model, "--formula", "<<1>> X"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn both_mode_tolerates_oracle_openness_on_duals() {
    // [1 -> {a,b}] <<a,b>> X p is provably true by the reduction, while the
    // bounded oracle can only leave the universal quantification open; that
    // must not count as a discrepancy
    let dir = tempfile::tempdir().unwrap();
    let model = write_lock(dir.path());
    let out = atlr(&[
        "check",
        "--model",
        &model,
        "--state",
        "locked",
        "--formula",
        "dsplit 1 -> {a,b} . <<a,b>> X unlocked_p",
        "--mode",
        "both",
    ]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("reduction=true"), "{stdout}");
    assert!(stdout.contains("agree"), "{stdout}");
}

#[test]
fn oracle_mode_runs() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_lock(dir.path());
    let out = atlr(&[
        "check",
        "--model",
        &model,
        "--state",
        "locked",
        "--formula",
        XOR_FORMULA,
        "--mode",
        "oracle",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("state locked: true"), "{stdout}");
}

#[test]
fn oracle_mode_emits_witness_too() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_lock(dir.path());
    let wpath = dir.path().join("oracle_witness.cgm");
    let out = atlr(&[
        "check",
        "--model",
        &model,
        "--state",
        "locked",
        "--formula",
        XOR_FORMULA,
        "--mode",
        "oracle",
        "--witness",
        wpath.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let base = atlr_core::load_model_str(LOCK).unwrap();
    let wf = atlr_core::parse_witness(&std::fs::read_to_string(&wpath).unwrap()).unwrap();
    assert!(atlr_core::resolve_witness(&base, &wf).is_ok());
}

#[test]
fn all_states_mode_reports_everything() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_lock(dir.path());
    let out = atlr(&["check", "--model", &model, "--formula", "<<1>> F unlocked_p"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("state locked: true"));
    assert!(stdout.contains("state unlocked: true"));
}

#[test]
fn bound_flag_is_respected() {
    let dir = tempfile::tempdir().unwrap();
    let model = write_lock(dir.path());
    // at bound 1 the xor witness does not exist (each sub-agent would have
    // one action, so the pair could not be surjective onto two actions and
    // singleton denial fails)
    let out = atlr(&[
        "check", "--model", &model, "--state", "locked", "--formula", XOR_FORMULA, "--bound", "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("false-up-to-bound"), "{stdout}");
}
