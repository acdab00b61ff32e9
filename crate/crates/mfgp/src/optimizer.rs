//! Minimization of the discrete trajectory functional.
//!
//! The feasible set is the open cone of ordered rows (particles strictly
//! increasing, lifted span under one period on the torus); the boundary is a
//! barrier because the gap terms blow up as cells collapse, but line searches
//! still need an explicit guard. Two ingredients provide it:
//!
//! * a fraction-to-boundary cap: a step may shrink no cell below
//!   `(1 - tau)` of its current width (`tau = 0.995` by default), and
//! * Armijo backtracking on top of the capped step.
//!
//! Search directions come from an inexact Newton solve (conjugate gradients
//! on Hessian–vector products, truncated on non-positive curvature) with an
//! L-BFGS fallback; plain L-BFGS and steepest descent are also available as
//! configured methods. Iterates stay lifted on the torus throughout — wrapping
//! happens only on output.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::discretization::{
    gradient, hessian_apply, max_abs, objective_scaled, ParticleState, TrajectoryGrid,
};
use crate::error::{Error, Result};
use crate::model::{Domain, ProblemSpec};

/// Search-direction strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    NewtonCg,
    Lbfgs,
    GradientDescent,
}

/// Initial-iterate strategy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum InitStrategy {
    /// Straight interpolation of the boundary rows (lifted coordinates).
    Linear,
    /// Linear interpolation plus a seeded feasible jitter; `amplitude` in
    /// (0, 1] scales the jitter relative to adjacent cell widths.
    RandomJitter { amplitude: f64 },
}

/// Solver knobs. The defaults are the contract: other call sites override
/// only what they name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: SolverMethod,
    /// Convergence threshold on the max-norm of the scaled gradient.
    pub grad_tol: f64,
    pub max_iters: usize,
    /// Fraction-to-boundary coefficient `tau`.
    pub fraction_to_boundary: f64,
    /// Armijo sufficient-decrease coefficient.
    pub armijo_c1: f64,
    /// Line-search backtracking factor.
    pub backtrack: f64,
    pub init: InitStrategy,
    /// Seed for the jittered initialization (unused by `Linear`).
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: SolverMethod::NewtonCg,
            grad_tol: 1e-8,
            max_iters: 5000,
            fraction_to_boundary: 0.995,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            init: InitStrategy::Linear,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::config(format!(
                "solver.grad_tol must be > 0 (got {})",
                self.grad_tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::config("solver.max_iters must be >= 1"));
        }
        if !(0.0 < self.fraction_to_boundary && self.fraction_to_boundary < 1.0) {
            return Err(Error::config(format!(
                "solver.fraction_to_boundary must lie in (0, 1) (got {})",
                self.fraction_to_boundary
            )));
        }
        if !(0.0 < self.armijo_c1 && self.armijo_c1 < 1.0) {
            return Err(Error::config(format!(
                "solver.armijo_c1 must lie in (0, 1) (got {})",
                self.armijo_c1
            )));
        }
        if !(0.0 < self.backtrack && self.backtrack < 1.0) {
            return Err(Error::config(format!(
                "solver.backtrack must lie in (0, 1) (got {})",
                self.backtrack
            )));
        }
        if let InitStrategy::RandomJitter { amplitude } = self.init {
            if !(0.0 < amplitude && amplitude <= 1.0) {
                return Err(Error::config(format!(
                    "solver.init.amplitude must lie in (0, 1] (got {amplitude})"
                )));
            }
        }
        Ok(())
    }
}

/// Outcome of a solve. `converged == false` with no error means the
/// iteration budget ran out; the fields still describe the last iterate.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub grid: TrajectoryGrid,
    pub iterations: usize,
    pub final_grad_norm: f64,
    /// Reported objective (the `1/N`-scaled functional).
    pub objective_value: f64,
    pub converged: bool,
    /// Reported objective after the initial iterate and each accepted step;
    /// non-increasing by construction.
    pub objective_trace: Vec<f64>,
    /// Smallest cell width over all rows of the final grid.
    pub min_gap: f64,
}

// ---------------------------------------------------------------------------
// Initial guesses
// ---------------------------------------------------------------------------

/// Straight-line interpolation between atomized boundary rows.
///
/// On the torus the terminal row is first re-lifted so each particle moves
/// to its nearest representative (less than half a period when the data
/// allows it); if per-particle lifts break the ordering cone, a single
/// global shift is tried instead.
pub fn initial_guess(
    spec: &ProblemSpec,
    initial: &ParticleState,
    terminal: &ParticleState,
) -> Result<TrajectoryGrid> {
    if initial.domain() != spec.domain || terminal.domain() != spec.domain {
        return Err(Error::config("boundary rows live on a different domain"));
    }
    if initial.len() != spec.n_particles || terminal.len() != spec.n_particles {
        return Err(Error::config(format!(
            "boundary rows have {} / {} particles, spec has N = {}",
            initial.len(),
            terminal.len(),
            spec.n_particles
        )));
    }
    let x0 = initial.positions();
    let lifted_terminal = match spec.domain {
        Domain::RealLine => terminal.positions().to_vec(),
        Domain::Torus => lift_terminal(x0, terminal.positions())?,
    };
    let n = spec.n_particles;
    let n_steps = spec.n_time_steps;
    let mut positions = Vec::with_capacity((n_steps + 1) * n);
    for k in 0..=n_steps {
        let w = k as f64 / n_steps as f64;
        for j in 0..n {
            positions.push(x0[j] * (1.0 - w) + lifted_terminal[j] * w);
        }
    }
    let grid = TrajectoryGrid::from_rows(positions, n, n_steps, spec.dt(), spec.domain)?;
    // Convexity of the cone makes every interpolated row feasible when the
    // endpoint rows are; assert rather than assume.
    grid.validate_feasible()?;
    Ok(grid)
}

/// Chooses lifted representatives of the terminal row near the initial row.
fn lift_terminal(x0: &[f64], xt: &[f64]) -> Result<Vec<f64>> {
    let per_particle: Vec<f64> = x0
        .iter()
        .zip(xt)
        .map(|(a, b)| b + (a - b).round())
        .collect();
    if is_feasible_torus_row(&per_particle) {
        return Ok(per_particle);
    }
    let mean_shift: f64 =
        x0.iter().zip(xt).map(|(a, b)| a - b).sum::<f64>() / x0.len() as f64;
    let shift = mean_shift.round();
    let global: Vec<f64> = xt.iter().map(|b| b + shift).collect();
    if is_feasible_torus_row(&global) {
        return Ok(global);
    }
    Err(Error::domain(
        "terminal row admits no lift moving each particle under one period; \
         boundary data may be inconsistently ordered",
    ))
}

fn is_feasible_torus_row(row: &[f64]) -> bool {
    row.windows(2).all(|w| w[1] > w[0]) && row[row.len() - 1] - row[0] < 1.0
}

/// Applies a seeded feasible jitter to the interior rows of a guess. Each
/// coordinate moves by less than 45% of its smaller adjacent cell width
/// (scaled by `amplitude`), which keeps every row strictly ordered.
pub fn jitter_guess(
    grid: &TrajectoryGrid,
    seed: u64,
    amplitude: f64,
) -> Result<TrajectoryGrid> {
    if !(0.0 < amplitude && amplitude <= 1.0) {
        return Err(Error::config(format!(
            "jitter amplitude must lie in (0, 1] (got {amplitude})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = grid.n_particles();
    let mut jittered = grid.clone();
    for k in 1..grid.n_steps() {
        let row = grid.row(k).to_vec();
        let gap = |j: usize| -> f64 {
            match (j, grid.domain()) {
                (0, Domain::Torus) => row[0] + 1.0 - row[n - 1],
                (0, Domain::RealLine) => f64::INFINITY,
                _ => row[j] - row[j - 1],
            }
        };
        let target = jittered.row_mut(k);
        for j in 0..n {
            let right = if j + 1 < n {
                gap(j + 1)
            } else {
                match grid.domain() {
                    Domain::Torus => gap(0),
                    Domain::RealLine => f64::INFINITY,
                }
            };
            let room = gap(j).min(right);
            let room = if room.is_finite() { room } else { 1.0 };
            target[j] = row[j] + rng.gen_range(-1.0..1.0) * 0.45 * amplitude * room;
        }
    }
    jittered.validate_feasible()?;
    Ok(jittered)
}

// ---------------------------------------------------------------------------
// Solve loop
// ---------------------------------------------------------------------------

/// Minimizes the trajectory functional from `guess`.
///
/// Returns `Ok` with `converged = false` when the iteration budget is
/// exhausted; returns [`Error::SolverStalled`] (carrying the best iterate)
/// when the line search cannot make progress.
pub fn solve(
    spec: &ProblemSpec,
    config: &SolverConfig,
    guess: &TrajectoryGrid,
) -> Result<SolveResult> {
    config.validate()?;
    guess.validate_feasible()?;
    let n = spec.n_particles as f64;
    let mut grid = match config.init {
        InitStrategy::Linear => guess.clone(),
        InitStrategy::RandomJitter { amplitude } => {
            jitter_guess(guess, config.seed, amplitude)?
        }
    };
    let dim = grid.interior_dim();
    let mut f = objective_scaled(spec, &grid)?;
    let mut trace = vec![f / n];
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut g = gradient(spec, &grid)?;
    let mut iterations = 0;
    let mut converged = false;
    // Steepest descent reuses its last accepted step length: restarting at
    // 1 would retry a step the quadratic model already rejected, and near
    // the optimum — where decreases round to noise and the slack rule
    // accepts anything — an overlong gradient step amplifies the error
    // instead of contracting it. Newton and L-BFGS must try the unit step.
    let mut descent_alpha = 1.0;

    for _ in 0..config.max_iters {
        let gnorm = max_abs(&g);
        if gnorm <= config.grad_tol {
            converged = true;
            break;
        }
        let mut direction = match config.method {
            SolverMethod::GradientDescent => g.iter().map(|v| -v).collect::<Vec<f64>>(),
            SolverMethod::Lbfgs => lbfgs_direction(&history, &g),
            SolverMethod::NewtonCg => newton_cg_direction(spec, &grid, &g)
                .unwrap_or_else(|| lbfgs_direction(&history, &g)),
        };
        // Safeguard: any non-descent direction falls back to the L-BFGS
        // metric, then to steepest descent.
        if dot(&g, &direction) >= -1e-14 * norm2(&g) * norm2(&direction) {
            direction = lbfgs_direction(&history, &g);
            if dot(&g, &direction) >= 0.0 {
                direction = g.iter().map(|v| -v).collect();
            }
        }

        let alpha_cap = fraction_to_boundary_cap(&grid, &direction, config.fraction_to_boundary);
        let start_alpha = match config.method {
            SolverMethod::GradientDescent => descent_alpha,
            _ => 1.0,
        };
        let mut alpha = alpha_cap.min(start_alpha);
        let slope = dot(&g, &direction);
        let interior = grid.interior();
        let mut trial = grid.clone();
        // Armijo with a floating-point slack: near machine-level optima the
        // true decrease can round away entirely.
        let f_slack = 8.0 * f64::EPSILON * f.abs();
        let f_new = loop {
            let moved: Vec<f64> = interior
                .iter()
                .zip(&direction)
                .map(|(x, d)| x + alpha * d)
                .collect();
            trial.set_interior(&moved);
            let f_trial = objective_scaled(spec, &trial)?;
            if f_trial <= f + config.armijo_c1 * alpha * slope + f_slack {
                break f_trial;
            }
            alpha *= config.backtrack;
            if alpha < 1e-16 {
                let result = SolveResult {
                    objective_value: f / n,
                    final_grad_norm: gnorm,
                    iterations,
                    converged: false,
                    objective_trace: trace.clone(),
                    min_gap: grid.min_gap(),
                    grid,
                };
                return Err(Error::SolverStalled { result: Box::new(result) });
            }
        };

        descent_alpha = alpha;
        let g_new = gradient(spec, &trial)?;
        let s: Vec<f64> = direction.iter().map(|d| alpha * d).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * norm2(&s) * norm2(&y) {
            if history.len() == 10 {
                history.pop_front();
            }
            history.push_back((s, y, sy));
        }

        debug_assert!(
            f_new / n <= f / n + 1e-12,
            "objective increased: {} -> {}",
            f / n,
            f_new / n
        );
        grid = trial;
        f = f_new;
        g = g_new;
        trace.push(f / n);
        iterations += 1;
        debug_assert_eq!(g.len(), dim);
    }

    if !converged {
        // The loop may have exited by budget with the last gradient unseen.
        converged = max_abs(&g) <= config.grad_tol;
    }
    Ok(SolveResult {
        objective_value: f / n,
        final_grad_norm: max_abs(&g),
        iterations,
        converged,
        objective_trace: trace,
        min_gap: grid.min_gap(),
        grid,
    })
}

/// Largest step fraction keeping every cell at least `(1 - tau)` of its
/// current width: `alpha <= tau * gap / (-dgap)` for each shrinking cell.
fn fraction_to_boundary_cap(grid: &TrajectoryGrid, direction: &[f64], tau: f64) -> f64 {
    let n = grid.n_particles();
    let mut cap = f64::INFINITY;
    for k in 1..grid.n_steps() {
        let row = grid.row(k);
        let d = &direction[(k - 1) * n..k * n];
        for j in 1..n {
            let dgap = d[j] - d[j - 1];
            if dgap < 0.0 {
                cap = cap.min(tau * (row[j] - row[j - 1]) / -dgap);
            }
        }
        if grid.domain() == Domain::Torus {
            let dgap = d[0] - d[n - 1];
            if dgap < 0.0 {
                cap = cap.min(tau * (row[0] + 1.0 - row[n - 1]) / -dgap);
            }
        }
    }
    cap
}

/// Truncated-CG solve of `H p = -g`. Returns `None` when the very first
/// curvature is non-positive (callers fall back to a quasi-Newton metric);
/// afterwards non-positive curvature just truncates.
fn newton_cg_direction(
    spec: &ProblemSpec,
    grid: &TrajectoryGrid,
    g: &[f64],
) -> Option<Vec<f64>> {
    let dim = g.len();
    let gnorm = norm2(g);
    if gnorm == 0.0 {
        return None;
    }
    let tol = gnorm * (1e-2_f64).min(gnorm.sqrt());
    let max_cg = dim.min(500);
    let mut p = vec![0.0; dim];
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut d = r.clone();
    let mut rs = dot(&r, &r);
    for cg_iter in 0..max_cg {
        let hd = hessian_apply(spec, grid, &d).ok()?;
        let dhd = dot(&d, &hd);
        if dhd <= 1e-12 * dot(&d, &d) {
            if cg_iter == 0 {
                return None;
            }
            break;
        }
        let step = rs / dhd;
        for i in 0..dim {
            p[i] += step * d[i];
            r[i] -= step * hd[i];
        }
        let rs_new = dot(&r, &r);
        if rs_new.sqrt() <= tol {
            break;
        }
        let beta = rs_new / rs;
        rs = rs_new;
        for i in 0..dim {
            d[i] = r[i] + beta * d[i];
        }
    }
    Some(p)
}

/// Two-loop L-BFGS direction; steepest descent on an empty history.
fn lbfgs_direction(history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, g: &[f64]) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, sy) in history.iter().rev() {
        let a = dot(s, &q) / sy;
        for i in 0..q.len() {
            q[i] -= a * y[i];
        }
        alphas.push(a);
    }
    if let Some((s, y, sy)) = history.back() {
        let gamma = sy / dot(y, y);
        let _ = s;
        for v in &mut q {
            *v *= gamma;
        }
    }
    for ((s, y, sy), a) in history.iter().zip(alphas.into_iter().rev()) {
        let b = dot(y, &q) / sy;
        for i in 0..q.len() {
            q[i] += (a - b) * s[i];
        }
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
