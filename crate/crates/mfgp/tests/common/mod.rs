//! Helpers shared by the integration suites.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use mfgp::{
    run_solve, CouplingSpec, DensitySpec, Domain, HamiltonianSpec, PotentialSpec,
    ProblemSpec, ReferenceId, RunArtifacts, RunConfig, SolverConfig, TrajectoryGrid,
};

/// Path of the compiled `mfgp` binary under test.
pub fn binary() -> &'static str {
    env!("CARGO_BIN_EXE_mfgp")
}

/// A problem instance paired with one of the closed-form solutions:
/// boundary densities drawn from it, comparison enabled, CDF output at the
/// mid time.
pub fn reference_config(id: ReferenceId, n: usize, n_t: usize) -> RunConfig {
    let sol = mfgp::reference(id);
    RunConfig {
        schema_version: 1,
        problem: ProblemSpec {
            domain: sol.domain,
            horizon: 1.0,
            n_particles: n,
            n_time_steps: n_t,
            hamiltonian: sol.hamiltonian.clone(),
            coupling: sol.coupling.clone(),
            potential: sol.potential.clone(),
            initial_density: DensitySpec::Reference { id, time: 0.0 },
            terminal_density: DensitySpec::Reference { id, time: 1.0 },
        },
        solver: SolverConfig::default(),
        diagnostics: None,
        reference: Some(id),
        cdf_times: vec![0.5],
        output_dir: PathBuf::from("mfgp_out"),
        seed: 0,
    }
}

/// A torus instance with constant potential — the hypothesis of every
/// conservation and convexity statement: uniform initial crowd, single-bump
/// terminal crowd, strictly convex coupling.
pub fn constant_potential_config(n: usize, n_t: usize) -> RunConfig {
    RunConfig {
        schema_version: 1,
        problem: ProblemSpec {
            domain: Domain::Torus,
            horizon: 1.0,
            n_particles: n,
            n_time_steps: n_t,
            hamiltonian: HamiltonianSpec::Quadratic,
            coupling: CouplingSpec::QuadraticHalf,
            potential: PotentialSpec::Constant { value: 0.0 },
            initial_density: DensitySpec::Uniform { lo: 0.0, hi: 1.0 },
            terminal_density: DensitySpec::Tabulated {
                path: None,
                xs: vec![0.0, 0.25, 0.5, 0.75, 1.0],
                densities: vec![0.4, 1.1, 1.8, 1.1, 0.4],
            },
        },
        solver: SolverConfig { grad_tol: 1e-10, ..SolverConfig::default() },
        diagnostics: None,
        reference: None,
        cdf_times: vec![0.5],
        output_dir: PathBuf::from("mfgp_out"),
        seed: 0,
    }
}

/// Solves a config through the same pipeline the CLI uses, panicking with
/// context on failure.
pub fn solve_config(config: &RunConfig, what: &str) -> RunArtifacts {
    config.validate().unwrap_or_else(|e| panic!("{what}: invalid config: {e}"));
    run_solve(config).unwrap_or_else(|e| panic!("{what}: solve failed: {e}"))
}

/// Serializes a config next to the tests' other outputs and returns its
/// path (for driving the binary).
pub fn write_config(dir: &Path, config: &RunConfig, name: &str) -> PathBuf {
    let path = dir.join(name);
    let text = serde_json::to_string_pretty(config).expect("config serializes");
    std::fs::write(&path, text).expect("config file writes");
    path
}

/// A random feasible trajectory: base rows drift by one cell width per
/// time step and each coordinate is jittered by ±0.2 cells. Gaps stay in
/// [0.6, 1.4] cells (ordering and the torus span bound hold by
/// construction) and every per-step displacement stays in the same range —
/// in particular bounded away from zero, where some Lagrangians lose
/// smoothness.
pub fn random_feasible_grid(
    rng: &mut ChaCha8Rng,
    domain: Domain,
    n: usize,
    n_t: usize,
    dt: f64,
) -> TrajectoryGrid {
    let spread = match domain {
        Domain::Torus => 1.0,
        Domain::RealLine => 2.0,
    };
    let cell = spread / n as f64;
    let mut rows = Vec::with_capacity((n_t + 1) * n);
    for k in 0..=n_t {
        let drift = cell * k as f64;
        for j in 0..n {
            let base = cell * (j as f64 + 0.5);
            rows.push(base + drift + rng.gen_range(-0.2..0.2) * cell);
        }
    }
    TrajectoryGrid::from_rows(rows, n, n_t, dt, domain)
        .expect("construction keeps rows ordered")
}
