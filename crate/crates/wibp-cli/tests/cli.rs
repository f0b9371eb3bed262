//! End-to-end tests of the `wibp` binary: exit codes, config resolution,
//! artifact round-trips, and byte-level determinism of reports across
//! thread counts.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_wibp"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn test_default_verify_passes_and_reports_are_parallelism_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one");
    let two = dir.path().join("two");
    let first = bin()
        .args(["verify", "--parallelism", "1", "--out"])
        .arg(&one)
        .output()
        .unwrap();
    assert_eq!(
        first.status.code(),
        Some(0),
        "default verify must pass: {}",
        stderr_of(&first)
    );
    let second = bin()
        .args(["verify", "--out"])
        .arg(&two)
        .env("WIBP_PARALLELISM", "2")
        .output()
        .unwrap();
    assert_eq!(second.status.code(), Some(0), "{}", stderr_of(&second));
    let a = fs::read(one.with_extension("json")).unwrap();
    let b = fs::read(two.with_extension("json")).unwrap();
    assert_eq!(a, b, "reports must not depend on the thread count");
    let doc: serde_json::Value = serde_json::from_slice(&a).unwrap();
    assert_eq!(doc["artifact"], "suite-reports");
    assert!(doc["reports"].as_array().unwrap().len() >= 5);
    for report in doc["reports"].as_array().unwrap() {
        assert_eq!(report["verdict"], "pass", "suite {}", report["suite"]);
    }
}

#[test]
fn test_constraint_violations_exit_2_naming_the_inequality() {
    let out = run(&["verify", "--beta", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("beta < 1"), "{}", stderr_of(&out));

    let out = run(&["simulate", "--beta", "0.5", "--c", "-0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("c > -beta"), "{}", stderr_of(&out));
}

#[test]
fn test_simulate_same_seed_is_byte_identical_csv() {
    let args = ["simulate", "--n", "500", "--seed", "7"];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.contains("# seed=7"));
    assert!(text.contains("n,W,lambda,L,K,N,Kbar,Z,G,L_B"));
}

#[test]
fn test_simulate_artifact_reruns_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let out = bin()
        .args([
            "simulate",
            "--n",
            "400",
            "--seed",
            "9",
            "--checkpoints",
            "100,200,400",
            "--out",
        ])
        .arg(&first)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let rerun = bin()
        .arg("simulate")
        .arg("--config")
        .arg(first.with_extension("json"))
        .arg("--out")
        .arg(&second)
        .output()
        .unwrap();
    assert_eq!(rerun.status.code(), Some(0), "{}", stderr_of(&rerun));
    for ext in ["json", "csv"] {
        let a = fs::read(first.with_extension(ext)).unwrap();
        let b = fs::read(second.with_extension(ext)).unwrap();
        assert_eq!(a, b, "{ext} artifact must rerun bit-exactly");
    }
}

#[test]
fn test_unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.conf");
    fs::write(&path, "bogus = 1\n").unwrap();
    let out = bin()
        .args(["verify", "--config"])
        .arg(&path)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("bogus"), "{}", stderr_of(&out));
}

#[test]
fn test_requested_inapplicable_suite_exits_3() {
    let out = run(&[
        "verify", "--suite", "finite", "--n", "200", "--reps", "120",
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "inapplicable must be distinct from failure: {}",
        stderr_of(&out)
    );
}

#[test]
fn test_estimate_emits_report_and_table() {
    let out = run(&[
        "estimate", "--alpha", "1", "--beta", "0.5", "--c", "1", "--n", "2000", "--seed", "3",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["artifact"], "estimate");
    assert_eq!(doc["config"]["level"], "0.95");
    let beta_hat = doc["report"]["beta_hat"].as_f64().unwrap();
    assert!((0.3..0.8).contains(&beta_hat), "beta_hat = {beta_hat}");
    let table = stderr_of(&out);
    assert!(table.contains("beta_hat"), "{table}");
    assert!(table.contains("ci(95%)"), "{table}");
}

#[test]
fn test_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    fs::write(&conf, "# base run\nseed = 1\nn = 300\n").unwrap();
    let stem = dir.path().join("traj");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&conf)
        .args(["--seed", "42", "--out"])
        .arg(&stem)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let doc: serde_json::Value =
        serde_json::from_slice(&fs::read(stem.with_extension("json")).unwrap()).unwrap();
    assert_eq!(doc["config"]["seed"], "42", "flag must beat the file");
    assert_eq!(doc["config"]["n"], "300", "file must beat the default");
}

#[test]
fn test_oracle_command_applicability() {
    let out = run(&["oracle", "--n", "300", "--reps", "150"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let reports = doc["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 1);
    assert_eq!(reports[0]["suite"], "poisson-oracle");

    let out = run(&["oracle", "--weights", "unif:1,2", "--n", "200", "--reps", "120"]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr_of(&out));
}

#[test]
fn test_help_is_available() {
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in ["simulate", "estimate", "verify", "oracle"] {
        assert!(text.contains(cmd), "{text}");
    }
}

/// Guard against path handling regressions: an output stem containing a
/// dot must not lose its suffix.
#[test]
fn test_out_stem_with_dot_keeps_both_extensions() {
    let dir = tempfile::tempdir().unwrap();
    let stem = dir.path().join("run.v1");
    let out = bin()
        .args(["simulate", "--n", "50", "--out"])
        .arg(&stem)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    assert!(Path::new(&format!("{}.csv", stem.display())).exists());
    assert!(Path::new(&format!("{}.json", stem.display())).exists());
}
