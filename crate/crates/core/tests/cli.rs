//! End-to-end runs of the binary: exit codes, output files, overrides.

use std::fs;
use std::path::Path;
use std::process::Command;

fn run(dir: &Path, config: &str, extra: &[&str]) -> i32 {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_semilab"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap();
    out.status.code().unwrap()
}

fn report(dir: &Path) -> String {
    fs::read_to_string(dir.join("out/report.csv")).unwrap()
}

#[test]
fn hypotheses_on_identity_pass() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), "scenario = hypotheses\npreset = identity\n", &[]), 0);
    let hyp = fs::read_to_string(dir.path().join("out/hypotheses.csv")).unwrap();
    assert!(hyp.contains("H1,pass") && hyp.contains("H2,pass") && hyp.contains("H3,pass"));
    assert!(report(dir.path()).starts_with("check,measured,bound,tolerance,verdict\n"));
}

#[test]
fn positive_v12_coupling_is_refuted() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(dir.path(), "scenario = positivity\npreset = coupling-positive-v12\nn = 64\n", &[]);
    assert_eq!(code, 0);
    let csv = report(dir.path());
    assert!(csv.lines().any(|l| l.starts_with("positivity_reverse,") && l.ends_with(",pass")));
    assert!(dir.path().join("out/witness_positivity_reverse.csv").exists());
}

#[test]
fn coarse_grid_fails_the_monotone_step() {
    // coupling-negative allows h <= 1; n = 5 on [-4, 4] gives h = 4/3
    let dir = tempfile::tempdir().unwrap();
    let code = run(dir.path(), "scenario = positivity\npreset = coupling-negative\nn = 5\n", &[]);
    assert_eq!(code, 1);
    assert!(report(dir.path()).contains(",fail"));
}

#[test]
fn malformed_configs_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), "dt = -1\n", &[]), 2);
    assert_eq!(run(dir.path(), "colour = blue\n", &[]), 2);
    assert_eq!(run(dir.path(), "preset = nope\n", &[]), 2);
    assert_eq!(run(dir.path(), "", &["--scenario", "nope"]), 2);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn overrides_and_seed_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let base = "scenario = hypotheses\npreset = smooth-coupled\nn = 32\n";
    assert_eq!(run(dir.path(), base, &["--scenario", "generation", "--seed", "3"]), 0);
    let first = report(dir.path());
    assert!(first.lines().any(|l| l.starts_with("accretivity,")));
    assert_eq!(run(dir.path(), base, &["--scenario", "generation", "--seed", "3"]), 0);
    assert_eq!(report(dir.path()), first);
    assert!(dir.path().join("out/snapshot_0.csv").exists());
}
