//! End-to-end tests that drive the installed binary the way a user would:
//! argument handling, exit codes, the error channel, and the advertised
//! output files.

mod common;

use std::process::{Command, Output};

use common::{binary, constant_potential_config, reference_config, write_config};
use mfgp::{load_trajectory_csv, objective, Domain, ReferenceId};

fn run(args: &[&str]) -> Output {
    Command::new(binary())
        .args(args)
        .output()
        .expect("binary is runnable")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn help_and_usage_errors_have_distinct_exit_codes() {
    let help = run(&["--help"]);
    assert_eq!(help.status.code(), Some(0), "--help should exit 0");
    let usage = run(&["frobnicate"]);
    assert_eq!(
        usage.status.code(),
        Some(1),
        "unknown subcommands are usage errors, got {:?}",
        usage.status
    );
}

#[test]
fn unknown_config_fields_are_named_on_stderr() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"schema_version": 1, "problms": {}, "problem": null}"#,
    )
    .unwrap();
    let out = run(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1), "config errors exit 1");
    let err = stderr_of(&out);
    assert!(
        err.contains("problms"),
        "stderr should name the offending field, got: {err}"
    );
}

#[test]
fn missing_config_files_exit_one_with_the_path() {
    let out = run(&["solve", "/no/such/config.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_of(&out);
    assert!(
        err.contains("/no/such/config.json"),
        "stderr should include the path, got: {err}"
    );
}

#[test]
fn undersized_particle_counts_are_rejected_by_name() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = constant_potential_config(4, 8);
    config.problem.n_particles = 1;
    let path = write_config(tmp.path(), &config, "tiny.json");
    let out = run(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = stderr_of(&out);
    assert!(
        err.contains("N must be >= 2"),
        "stderr should explain the bound, got: {err}"
    );
}

#[test]
fn diagnose_passes_and_writes_both_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = constant_potential_config(4, 8);
    config.output_dir = tmp.path().join("out");
    let path = write_config(tmp.path(), &config, "run.json");
    let out = run(&["diagnose", path.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "all applicable checks should pass, stderr: {}",
        stderr_of(&out)
    );
    let checks: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(config.output_dir.join("checks.json")).unwrap())
            .unwrap();
    assert_eq!(
        checks["all_applicable_pass"], true,
        "checks.json should agree with the exit code: {checks}"
    );
    let diagnostics =
        std::fs::read_to_string(config.output_dir.join("diagnostics.csv")).unwrap();
    assert!(
        diagnostics.starts_with("series,index,t,value\n"),
        "diagnostics.csv header mismatch: {}",
        diagnostics.lines().next().unwrap_or_default()
    );
}

#[test]
fn written_trajectories_reproduce_the_reported_objective() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = reference_config(ReferenceId::Test1, 10, 16);
    config.output_dir = tmp.path().join("out");
    let path = write_config(tmp.path(), &config, "run.json");
    let out = run(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));

    let grid = load_trajectory_csv(&config.output_dir.join("trajectory.csv"), Domain::Torus)
        .expect("written trajectory parses back");
    let recomputed = objective(&config.problem, &grid).unwrap();
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(config.output_dir.join("summary.json")).unwrap())
            .unwrap();
    let reported = summary["objective"].as_f64().unwrap();
    assert!(
        (recomputed - reported).abs() <= 1e-12,
        "objective drifted through the text round-trip: file gives {recomputed:.17e}, \
         summary gives {reported:.17e}"
    );
}

#[test]
fn sweep_csv_has_the_documented_schema() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = constant_potential_config(4, 8);
    config.output_dir = tmp.path().join("sweep");
    let path = write_config(tmp.path(), &config, "run.json");
    let out = Command::new(binary())
        .args(["sweep", path.to_str().unwrap(), "--axis", "N", "--values", "4,6"])
        .env("MFGP_THREADS", "1")
        .output()
        .expect("binary is runnable");
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    let csv = std::fs::read_to_string(config.output_dir.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some(
            "axis,value,converged,objective,final_grad_norm,cdf_sup_error_mid,\
             energy_interior_drift,runtime_seconds,error"
        )
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2, "one row per requested value: {csv}");
    assert!(rows[0].starts_with("N,4,true,"), "first row: {}", rows[0]);
    assert!(rows[1].starts_with("N,6,true,"), "second row: {}", rows[1]);
    assert!(
        config.output_dir.join("checks.json").exists(),
        "sweep should write its trend checks next to the table"
    );
    assert!(
        config.output_dir.join("run_N_6").join("summary.json").exists(),
        "each member run keeps its own artifacts"
    );
}

#[test]
fn starved_solves_exit_two_but_still_write_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = constant_potential_config(4, 8);
    config.solver.max_iters = 1;
    config.solver.grad_tol = 1e-15;
    config.output_dir = tmp.path().join("out");
    let path = write_config(tmp.path(), &config, "run.json");
    let out = run(&["solve", path.to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "non-convergence is reported through the exit code, stderr: {}",
        stderr_of(&out)
    );
    for file in ["trajectory.csv", "summary.json"] {
        assert!(
            config.output_dir.join(file).exists(),
            "{file} should be written even without convergence"
        );
    }
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(config.output_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["converged"], false, "summary: {summary}");
}

#[test]
fn override_flags_reach_the_solver() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = constant_potential_config(4, 8);
    config.output_dir = tmp.path().join("ignored");
    let path = write_config(tmp.path(), &config, "run.json");
    let redirected = tmp.path().join("elsewhere");
    let out = Command::new(binary())
        .args([
            "solve",
            path.to_str().unwrap(),
            "--output-dir",
            redirected.to_str().unwrap(),
            "--max-iters",
            "400",
        ])
        .output()
        .expect("binary is runnable");
    assert_eq!(out.status.code(), Some(0), "stderr: {}", stderr_of(&out));
    assert!(
        redirected.join("summary.json").exists(),
        "--output-dir should redirect every artifact"
    );
    assert!(
        !config.output_dir.exists(),
        "the configured directory must stay untouched when overridden"
    );
}
