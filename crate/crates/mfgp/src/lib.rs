//! Particle approximation of one-dimensional first-order planning problems.
//!
//! A crowd evolving between a prescribed initial and terminal density is
//! discretized as `N` ordered particles (quantiles of the distribution) on
//! `N_T` time steps. The continuous problem — a coupled Hamilton–Jacobi /
//! transport system with both endpoint densities pinned — becomes a finite
//! convex program over interior particle positions:
//!
//! * [`model`] declares the ingredients: domain, Hamiltonian and its
//!   Legendre transform, density coupling and its enthalpy, potential.
//! * [`quantile`] turns boundary densities into particle rows and particle
//!   rows back into distribution functions.
//! * [`discretization`] evaluates the discrete action, its gradient,
//!   Hessian–vector products, and the force-balance residual.
//! * [`optimizer`] minimizes the action with an interior-point-flavoured
//!   Newton-CG iteration.
//! * [`diagnostics`] measures the structure the minimizer should carry:
//!   conserved momentum and energy, displacement convexity of internal
//!   energies, log-convexity of power sums.
//! * [`exact`] holds closed-form reference solutions used by tests and the
//!   `checks` output.
//! * [`config`] / [`output`] / [`cli`] back the command-line tool.

// Float validation deliberately spells bounds as negated comparisons
// (`!(x > 0.0)`) so NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod discretization;
pub mod error;
pub mod exact;
pub mod model;
pub mod optimizer;
pub mod output;
pub mod quantile;

pub use cli::{
    cmd_diagnose, cmd_solve, cmd_sweep, run_solve, write_solve_outputs, ChecksReport,
    Overrides, RunArtifacts, SweepAxis,
};
pub use config::{load_config, parse_config, RunConfig};
pub use diagnostics::{
    displacement_series, energy_series, interior_drift, lp_logconvexity, min_chord_slack,
    min_second_difference, momentum_series, run_diagnostics, uniform_lp_bound,
    ConvexTestFunction, DiagnosticsReport, DiagnosticsRequest,
};
pub use discretization::{
    discrete_density, euler_lagrange_residual, gradient, hessian_apply, max_abs, objective,
    objective_scaled, DiscreteDensity, ParticleState, TrajectoryGrid,
};
pub use error::{Error, Result};
pub use exact::{reference, ReferenceId, ReferenceSolution};
pub use model::{CouplingSpec, Domain, HamiltonianSpec, PotentialSpec, ProblemSpec};
pub use optimizer::{
    initial_guess, jitter_guess, solve, InitStrategy, SolveResult, SolverConfig, SolverMethod,
};
pub use output::{
    fmt_g17, load_trajectory_csv, parse_trajectory_csv, write_cdf_csv, write_diagnostics_csv,
    write_json, write_sweep_csv, write_trajectory_csv, SweepRow,
};
pub use quantile::{
    atomize, atomize_with_offset, cdf_points, cdf_sup_error, CdfPoints, DensitySpec,
    TabulatedDensity,
};
