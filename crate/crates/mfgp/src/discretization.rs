//! Fully discrete trajectory functional: state, objective, derivatives.
//!
//! `N` ordered particles carry mass `1/N` each and trace a trajectory grid of
//! `N_T + 1` time rows. Between neighbors the reconstructed density is the
//! gap average
//!
//! ```text
//!   R_i = delta_N / (x_i - x_{i-1}),        delta_N = 1/N,
//! ```
//!
//! with `x_0 = x_N - 1` on the torus (the wraparound gap) and `x_0 = -inf`
//! on the real line (outermost gaps carry density zero). The discrete
//! planning objective, with the overall `dt` factor dropped (it rescales but
//! does not move minimizers),
//!
//! ```text
//!   J = (1/N) sum_{i=1..N} sum_{n=0..N_T-1}
//!         [ L((x_i^{n+1} - x_i^n)/dt) + G(R_i^n) - V(x_i^n, t_n) ],
//! ```
//!
//! is minimized over the interior rows `n = 1..N_T-1`; rows 0 and `N_T` are
//! pinned to atomized boundary data. [`gradient`] and [`hessian_apply`]
//! differentiate the `N`-scaled sum (no `1/N`), which keeps component `(j, k)`
//! in the familiar per-particle form
//!
//! ```text
//!   [L'(v_j^{k-1}) - L'(v_j^k)]/dt
//!     + G'(R_{j+1}^k) delta_N / (x_{j+1}^k - x_j^k)^2
//!     - G'(R_j^k)     delta_N / (x_j^k - x_{j-1}^k)^2
//!     - V_x(x_j^k, t_k).
//! ```
//!
//! The Hessian is block tridiagonal in time (through `L''`) and cyclically
//! tridiagonal in the particle index (through the gap terms), which is why
//! only its action on a vector is ever materialized.

use crate::error::{Error, Result};
use crate::model::{flux_b_or_zero, Domain, ProblemSpec};

/// One time row of ordered particle positions (lifted coordinates on the
/// torus: strictly increasing with span `x_N - x_1 < 1`).
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleState {
    positions: Vec<f64>,
    domain: Domain,
}

impl ParticleState {
    /// Validates ordering (and the span constraint on the torus).
    pub fn new(positions: Vec<f64>, domain: Domain) -> Result<Self> {
        if positions.len() < 2 {
            return Err(Error::config(format!(
                "N must be >= 2 (got {})",
                positions.len()
            )));
        }
        if positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("particle positions must be finite"));
        }
        for i in 1..positions.len() {
            if !(positions[i] > positions[i - 1]) {
                return Err(Error::DegenerateBoundary { i, j: i + 1 });
            }
        }
        if domain == Domain::Torus {
            let span = positions[positions.len() - 1] - positions[0];
            if !(span < 1.0) {
                return Err(Error::domain(format!(
                    "torus span must be < 1 (got {span})"
                )));
            }
        }
        Ok(ParticleState { positions, domain })
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Reconstructed piecewise-constant density of one row: cell `i` sits
/// between particles `i-1` and `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDensity {
    values: Vec<f64>,
    gaps: Vec<f64>,
    domain: Domain,
}

impl DiscreteDensity {
    /// Cell densities `R_1..R_N`. On the real line `R_1 = 0` (infinite
    /// leading gap).
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Cell widths; `gaps()[0]` is `+inf` on the real line.
    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    /// Total reconstructed mass: 1 on the torus, `(N-1)/N` on the real line
    /// (the outermost half-cells carry their mass at density zero).
    pub fn total_mass(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.gaps)
            .filter(|(_, g)| g.is_finite())
            .map(|(r, g)| r * g)
            .sum()
    }
}

/// Gap average densities of a particle row.
pub fn discrete_density(state: &ParticleState) -> Result<DiscreteDensity> {
    let xs = state.positions();
    let n = xs.len();
    let delta = 1.0 / n as f64;
    let mut values = Vec::with_capacity(n);
    let mut gaps = Vec::with_capacity(n);
    match state.domain() {
        Domain::Torus => {
            let wrap = xs[0] + 1.0 - xs[n - 1];
            values.push(delta / wrap);
            gaps.push(wrap);
        }
        Domain::RealLine => {
            values.push(0.0);
            gaps.push(f64::INFINITY);
        }
    }
    for i in 1..n {
        let gap = xs[i] - xs[i - 1];
        values.push(delta / gap);
        gaps.push(gap);
    }
    Ok(DiscreteDensity { values, gaps, domain: state.domain() })
}

// ---------------------------------------------------------------------------
// Trajectory grid
// ---------------------------------------------------------------------------

/// `N_T + 1` rows of `N` particle positions, row-major by time, plus the
/// time step. Rows 0 and `N_T` hold the pinned boundary data.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryGrid {
    positions: Vec<f64>,
    n: usize,
    n_steps: usize,
    dt: f64,
    domain: Domain,
}

impl TrajectoryGrid {
    /// Builds from a flat row-major position table.
    pub fn from_rows(
        positions: Vec<f64>,
        n: usize,
        n_steps: usize,
        dt: f64,
        domain: Domain,
    ) -> Result<Self> {
        if n < 2 || n_steps < 1 {
            return Err(Error::config(format!(
                "grid needs N >= 2 and N_T >= 1 (got N = {n}, N_T = {n_steps})"
            )));
        }
        if positions.len() != (n_steps + 1) * n {
            return Err(Error::config(format!(
                "grid expects {} positions, got {}",
                (n_steps + 1) * n,
                positions.len()
            )));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::config(format!("dt must be > 0 (got {dt})")));
        }
        Ok(TrajectoryGrid { positions, n, n_steps, dt, domain })
    }

    pub fn n_particles(&self) -> usize {
        self.n
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.positions[k * self.n..(k + 1) * self.n]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.positions[k * self.n..(k + 1) * self.n]
    }

    /// Row `k` as a validated state.
    pub fn state(&self, k: usize) -> Result<ParticleState> {
        ParticleState::new(self.row(k).to_vec(), self.domain)
    }

    /// Number of free coordinates (interior rows times particles).
    pub fn interior_dim(&self) -> usize {
        (self.n_steps - 1) * self.n
    }

    /// Copies the interior rows into a flat vector (row-major, `k = 1..N_T-1`).
    pub fn interior(&self) -> Vec<f64> {
        self.positions[self.n..self.n_steps * self.n].to_vec()
    }

    /// Overwrites the interior rows from a flat vector.
    pub fn set_interior(&mut self, interior: &[f64]) {
        assert_eq!(interior.len(), self.interior_dim(), "interior size mismatch");
        self.positions[self.n..self.n_steps * self.n].copy_from_slice(interior);
    }

    /// Checks every row for strict ordering (and torus span), reporting the
    /// first collision with its indices.
    pub fn validate_feasible(&self) -> Result<()> {
        for k in 0..=self.n_steps {
            let row = self.row(k);
            for i in 1..self.n {
                if !(row[i] > row[i - 1]) {
                    return Err(Error::domain(format!(
                        "particle collision at time row {k}: x_{} >= x_{}",
                        i,
                        i + 1
                    )));
                }
            }
            if self.domain == Domain::Torus && !(row[self.n - 1] - row[0] < 1.0) {
                return Err(Error::domain(format!(
                    "torus span >= 1 at time row {k}"
                )));
            }
        }
        Ok(())
    }

    /// Smallest cell gap over all rows (wraparound included on the torus;
    /// the infinite real-line boundary gaps are ignored).
    pub fn min_gap(&self) -> f64 {
        let mut min = f64::INFINITY;
        for k in 0..=self.n_steps {
            let row = self.row(k);
            for i in 1..self.n {
                min = min.min(row[i] - row[i - 1]);
            }
            if self.domain == Domain::Torus {
                min = min.min(row[0] + 1.0 - row[self.n - 1]);
            }
        }
        min
    }
}

/// Cell gap to the left of particle `j` in a row; `None` when that gap is
/// the infinite real-line boundary.
#[inline]
fn left_gap(row: &[f64], j: usize, domain: Domain) -> Option<f64> {
    if j == 0 {
        match domain {
            Domain::Torus => Some(row[0] + 1.0 - row[row.len() - 1]),
            Domain::RealLine => None,
        }
    } else {
        Some(row[j] - row[j - 1])
    }
}

fn checked_gap(gap: f64, k: usize, i: usize) -> Result<f64> {
    if !(gap > 0.0) {
        return Err(Error::domain(format!(
            "particle collision at time row {k}: x_{} >= x_{}",
            i,
            i + 1
        )));
    }
    Ok(gap)
}

// ---------------------------------------------------------------------------
// Objective, gradient, Hessian action, optimality residual
// ---------------------------------------------------------------------------

/// The reported objective `J` (with the leading `1/N`).
pub fn objective(spec: &ProblemSpec, grid: &TrajectoryGrid) -> Result<f64> {
    Ok(objective_scaled(spec, grid)? / grid.n_particles() as f64)
}

/// The `N`-scaled objective actually optimized: plain sums, no `1/N`.
pub fn objective_scaled(spec: &ProblemSpec, grid: &TrajectoryGrid) -> Result<f64> {
    check_shapes(spec, grid)?;
    let n = grid.n_particles();
    let dt = grid.dt();
    let delta = spec.delta_n();
    let mut total = 0.0;
    for k in 0..grid.n_steps() {
        let row = grid.row(k);
        let next = grid.row(k + 1);
        let t = grid.time(k);
        for j in 0..n {
            total += spec.hamiltonian.lagrangian((next[j] - row[j]) / dt)?;
            total -= spec.potential_at(row[j], t);
            if let Some(gap) = left_gap(row, j, grid.domain()) {
                let gap = checked_gap(gap, k, j.max(1))?;
                total += spec.coupling.enthalpy(delta / gap)?;
            }
        }
    }
    Ok(total)
}

/// Gradient of the `N`-scaled objective over interior rows, flat row-major
/// (`k = 1..N_T-1` outer, particle index inner).
pub fn gradient(spec: &ProblemSpec, grid: &TrajectoryGrid) -> Result<Vec<f64>> {
    check_shapes(spec, grid)?;
    let n = grid.n_particles();
    let dt = grid.dt();
    let delta = spec.delta_n();
    let mut out = vec![0.0; grid.interior_dim()];
    for k in 1..grid.n_steps() {
        let prev = grid.row(k - 1);
        let row = grid.row(k);
        let next = grid.row(k + 1);
        let t = grid.time(k);
        let base = (k - 1) * n;
        for j in 0..n {
            let v_in = (row[j] - prev[j]) / dt;
            let v_out = (next[j] - row[j]) / dt;
            let mut g = (spec.hamiltonian.lagrangian_prime(v_in)?
                - spec.hamiltonian.lagrangian_prime(v_out)?)
                / dt;
            // Right cell (between particles j and j+1), wrapping on the torus.
            if j + 1 < n || grid.domain() == Domain::Torus {
                let gap = if j + 1 < n {
                    row[j + 1] - row[j]
                } else {
                    row[0] + 1.0 - row[n - 1]
                };
                let gap = checked_gap(gap, k, j + 1)?;
                g += spec.coupling.enthalpy_prime(delta / gap)? * delta / (gap * gap);
            }
            // Left cell (between particles j-1 and j).
            if let Some(gap) = left_gap(row, j, grid.domain()) {
                let gap = checked_gap(gap, k, j.max(1))?;
                g -= spec.coupling.enthalpy_prime(delta / gap)? * delta / (gap * gap);
            }
            g -= spec.potential_x_at(row[j], t);
            out[base + j] = g;
        }
    }
    Ok(out)
}

/// Action of the exact Hessian of the `N`-scaled objective on an interior
/// direction vector (same layout as [`gradient`]).
pub fn hessian_apply(
    spec: &ProblemSpec,
    grid: &TrajectoryGrid,
    direction: &[f64],
) -> Result<Vec<f64>> {
    check_shapes(spec, grid)?;
    let n = grid.n_particles();
    let n_steps = grid.n_steps();
    assert_eq!(direction.len(), grid.interior_dim(), "direction size mismatch");
    let dt = grid.dt();
    let delta = spec.delta_n();
    let mut out = vec![0.0; direction.len()];
    // d on pinned rows is zero.
    let d_at = |k: usize, j: usize| -> f64 {
        if k == 0 || k == n_steps {
            0.0
        } else {
            direction[(k - 1) * n + j]
        }
    };
    for k in 1..n_steps {
        let prev = grid.row(k - 1);
        let row = grid.row(k);
        let next = grid.row(k + 1);
        let t = grid.time(k);
        let base = (k - 1) * n;
        for j in 0..n {
            let v_in = (row[j] - prev[j]) / dt;
            let v_out = (next[j] - row[j]) / dt;
            let mut h = spec.hamiltonian.lagrangian_second(v_in)?
                * (d_at(k, j) - d_at(k - 1, j))
                / (dt * dt)
                - spec.hamiltonian.lagrangian_second(v_out)?
                    * (d_at(k + 1, j) - d_at(k, j))
                    / (dt * dt);
            // Second derivative of G(delta/gap) in the gap width:
            //   psi''(gap) = G''(R) delta^2 / gap^4 + 2 G'(R) delta / gap^3.
            let psi2 = |gap: f64| -> Result<f64> {
                let r = delta / gap;
                Ok(spec.coupling.enthalpy_second(r)? * delta * delta / gap.powi(4)
                    + 2.0 * spec.coupling.enthalpy_prime(r)? * delta / gap.powi(3))
            };
            if j + 1 < n || grid.domain() == Domain::Torus {
                let (gap, d_right) = if j + 1 < n {
                    (row[j + 1] - row[j], d_at(k, j + 1))
                } else {
                    (row[0] + 1.0 - row[n - 1], d_at(k, 0))
                };
                let gap = checked_gap(gap, k, j + 1)?;
                h -= psi2(gap)? * (d_right - d_at(k, j));
            }
            if j > 0 || grid.domain() == Domain::Torus {
                let (gap, d_left) = if j > 0 {
                    (row[j] - row[j - 1], d_at(k, j - 1))
                } else {
                    (row[0] + 1.0 - row[n - 1], d_at(k, n - 1))
                };
                let gap = checked_gap(gap, k, j.max(1))?;
                h += psi2(gap)? * (d_at(k, j) - d_left);
            }
            h -= spec.potential_xx_at(row[j], t) * d_at(k, j);
            out[base + j] = h;
        }
    }
    Ok(out)
}

/// Residual of the per-particle optimality system at interior rows,
/// `L''(v_j^k) (x_j^{k+1} - 2 x_j^k + x_j^{k-1}) / dt^2
///  - N (B(R_{j+1}^k) - B(R_j^k)) + V_x(x_j^k, t_k)`,
/// in the same flat layout as [`gradient`].
///
/// For a quadratic Hamiltonian this is algebraically the negated gradient
/// (the discrete stationarity IS the central-difference time discretization
/// of the optimality system); for other Hamiltonians it measures the O(dt)
/// gap between forward/backward `L'` differences and `L'' x''`.
pub fn euler_lagrange_residual(spec: &ProblemSpec, grid: &TrajectoryGrid) -> Result<Vec<f64>> {
    check_shapes(spec, grid)?;
    let n = grid.n_particles();
    let n_scale = n as f64;
    let dt = grid.dt();
    let delta = spec.delta_n();
    let mut out = vec![0.0; grid.interior_dim()];
    for k in 1..grid.n_steps() {
        let prev = grid.row(k - 1);
        let row = grid.row(k);
        let next = grid.row(k + 1);
        let t = grid.time(k);
        let base = (k - 1) * n;
        for j in 0..n {
            let v = (next[j] - row[j]) / dt;
            let accel = (next[j] - 2.0 * row[j] + prev[j]) / (dt * dt);
            let r_right = if j + 1 < n {
                delta / checked_gap(row[j + 1] - row[j], k, j + 1)?
            } else if grid.domain() == Domain::Torus {
                delta / checked_gap(row[0] + 1.0 - row[n - 1], k, j + 1)?
            } else {
                0.0
            };
            let r_left = match left_gap(row, j, grid.domain()) {
                Some(gap) => delta / checked_gap(gap, k, j.max(1))?,
                None => 0.0,
            };
            let b_right = flux_b_or_zero(&spec.coupling, r_right)?;
            let b_left = flux_b_or_zero(&spec.coupling, r_left)?;
            out[base + j] = spec.hamiltonian.lagrangian_second(v)? * accel
                - n_scale * (b_right - b_left)
                + spec.potential_x_at(row[j], t);
        }
    }
    Ok(out)
}

/// Max-norm helper for flat residual/gradient vectors.
pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |a: f64, &v| a.max(v.abs()))
}

fn check_shapes(spec: &ProblemSpec, grid: &TrajectoryGrid) -> Result<()> {
    if spec.n_particles != grid.n_particles() {
        return Err(Error::config(format!(
            "spec N = {} but grid N = {}",
            spec.n_particles,
            grid.n_particles()
        )));
    }
    if spec.domain != grid.domain() {
        return Err(Error::config("spec and grid domains differ"));
    }
    Ok(())
}
