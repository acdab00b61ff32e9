//! Structural measurements on a solved trajectory.
//!
//! A minimizer of the discrete action is not just a point cloud: along it,
//! the velocity sum `Σ L'(v_i)` is conserved up to potential forcing, the
//! energy sum `Σ [L'(v)v − L(v) − G(R)]` is conserved in the time-continuous
//! limit, and internal energies `Σ U(R_i)·gap_i` are convex in time for
//! convex `U` — which is what keeps particles ordered and densities bounded.
//! This module computes those series and the scalar summaries (drifts,
//! second differences, chord slacks, log-convexity violations) that the
//! check layer compares against tolerances.
//!
//! Conventions, fixed once for every series here: velocities are forward
//! differences `v_i^k = (x_i^{k+1} − x_i^k)/Δt`, and step-indexed quantities
//! evaluate densities at the left time node. On the real line the boundary
//! cells are infinitely wide with zero density; sums weighted by cell width
//! skip them (their limit contribution is zero for every admissible
//! integrand), and width-free sums use `R = 0` directly.

use serde::{Deserialize, Serialize};

use crate::discretization::{euler_lagrange_residual, gradient, max_abs, TrajectoryGrid};
use crate::error::{Error, Result};
use crate::exact::ReferenceSolution;
use crate::model::{Domain, ProblemSpec};
use crate::quantile::{cdf_points, cdf_sup_error};

/// Convex probe function `U` for the internal-energy series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ConvexTestFunction {
    /// `U(z) = z^p`, `p >= 1`.
    Power { p: f64 },
    /// `U(z) = e^{-z}`.
    ExpNeg,
    /// `U(z) = z log z`, extended by `U(0) = 0`.
    Entropy,
}

impl ConvexTestFunction {
    pub fn validate(&self) -> Result<()> {
        if let ConvexTestFunction::Power { p } = self {
            if !(p.is_finite() && *p >= 1.0) {
                return Err(Error::config(format!(
                    "power test function needs p >= 1 (got {p})"
                )));
            }
        }
        // Convexity across the family, by second-difference sampling; this
        // is a guard on future edits, not on runtime data.
        let h = 1e-3;
        for k in 0..256 {
            let z = h + 0.04 * k as f64;
            let second = self.value(z - h) - 2.0 * self.value(z) + self.value(z + h);
            if second < -1e-12 * self.value(z).abs().max(1.0) {
                return Err(Error::config(format!(
                    "{self:?} fails convexity sampling at z = {z}"
                )));
            }
        }
        Ok(())
    }

    pub fn value(&self, z: f64) -> f64 {
        match self {
            ConvexTestFunction::Power { p } => z.powf(*p),
            ConvexTestFunction::ExpNeg => (-z).exp(),
            ConvexTestFunction::Entropy => {
                if z == 0.0 {
                    0.0
                } else {
                    z * z.ln()
                }
            }
        }
    }

    /// Whether `U(0) = 0`; required on unbounded domains, where the empty
    /// boundary cells would otherwise contribute `U(0) · ∞`.
    pub fn vanishes_at_zero(&self) -> bool {
        match self {
            ConvexTestFunction::Power { .. } => true,
            ConvexTestFunction::ExpNeg => false,
            ConvexTestFunction::Entropy => true,
        }
    }

    /// Stable label used in CSV output and error messages.
    pub fn label(&self) -> String {
        match self {
            ConvexTestFunction::Power { p } => format!("power_{p}"),
            ConvexTestFunction::ExpNeg => "exp_neg".to_string(),
            ConvexTestFunction::Entropy => "entropy".to_string(),
        }
    }
}

// ---------------------------------------------------------------------------
// Core series
// ---------------------------------------------------------------------------

/// Momentum series `M^k = Σ_i L'(v_i^k)`, one entry per time step.
///
/// Along a stationary trajectory the identity
/// `M^k − M^{k−1} = −Δt · Σ_j [∇J_{j,k} + V_x(x_j^k, t_k)]`
/// holds exactly (the density terms telescope), so `M` is constant for
/// constant potentials up to `N · ‖∇J‖_∞` and otherwise drifts with the
/// total force.
pub fn momentum_series(spec: &ProblemSpec, grid: &TrajectoryGrid) -> Result<Vec<f64>> {
    let dt = grid.dt();
    let n = grid.n_particles();
    let mut series = Vec::with_capacity(grid.n_steps());
    for k in 0..grid.n_steps() {
        let row = grid.row(k);
        let next = grid.row(k + 1);
        let mut sum = 0.0;
        for j in 0..n {
            sum += spec.hamiltonian.lagrangian_prime((next[j] - row[j]) / dt)?;
        }
        series.push(sum);
    }
    Ok(series)
}

/// Energy series `E^k = Σ_i [L'(v_i^k) v_i^k − L(v_i^k) − G(R_i^k)]`, one
/// entry per time step, densities at the left node. Conserved only in the
/// time-continuous limit; the interior drift is the refinement observable.
pub fn energy_series(spec: &ProblemSpec, grid: &TrajectoryGrid) -> Result<Vec<f64>> {
    let dt = grid.dt();
    let n = grid.n_particles();
    let mut series = Vec::with_capacity(grid.n_steps());
    for k in 0..grid.n_steps() {
        let state = grid.state(k)?;
        let density = crate::discretization::discrete_density(&state)?;
        let row = grid.row(k);
        let next = grid.row(k + 1);
        let mut sum = 0.0;
        for j in 0..n {
            let v = (next[j] - row[j]) / dt;
            let lp = spec.hamiltonian.lagrangian_prime(v)?;
            let l = spec.hamiltonian.lagrangian(v)?;
            sum += lp * v - l - spec.coupling.enthalpy(density.values()[j])?;
        }
        series.push(sum);
    }
    Ok(series)
}

/// Internal-energy series `D^n = Σ_i U(R_i^n) · (x_i^n − x_{i−1}^n)`, one
/// entry per time node. Convex in `n` along minimizers for convex `U`.
pub fn displacement_series(
    grid: &TrajectoryGrid,
    u: &ConvexTestFunction,
) -> Result<Vec<f64>> {
    u.validate()?;
    if grid.domain() == Domain::RealLine && !u.vanishes_at_zero() {
        return Err(Error::config(format!(
            "test function {} has U(0) != 0 and cannot be used on the real line",
            u.label()
        )));
    }
    let mut series = Vec::with_capacity(grid.n_steps() + 1);
    for k in 0..=grid.n_steps() {
        let state = grid.state(k)?;
        let density = crate::discretization::discrete_density(&state)?;
        let mut sum = 0.0;
        for (r, gap) in density.values().iter().zip(density.gaps()) {
            if gap.is_finite() {
                sum += u.value(*r) * gap;
            }
            // Infinite boundary cells carry zero density; with U(0) = 0
            // (enforced above) their limit contribution is zero.
        }
        series.push(sum);
    }
    Ok(series)
}

/// Power-sum series and its log-convexity violation.
#[derive(Debug, Clone, PartialEq)]
pub struct LpLogConvexity {
    pub exponent: f64,
    /// `S_p^n = Σ_i (R_i^n)^p`, one entry per time node.
    pub series: Vec<f64>,
    /// `max_n [ S_p^n − (S_p^0)^{1−t_n/T} (S_p^{N_T})^{t_n/T} ]`; at most a
    /// discretization-level positive number when the guarantee holds.
    pub violation: f64,
}

/// Power sums of the density and how far they poke above the geometric
/// interpolation of their endpoint values. `p = 0` counts particles and is
/// trivially flat; `p < 0` is rejected.
pub fn lp_logconvexity(grid: &TrajectoryGrid, p: f64) -> Result<LpLogConvexity> {
    if !(p >= 0.0) {
        return Err(Error::domain(format!("power sum needs p >= 0 (got {p})")));
    }
    let mut series = Vec::with_capacity(grid.n_steps() + 1);
    for k in 0..=grid.n_steps() {
        let state = grid.state(k)?;
        let density = crate::discretization::discrete_density(&state)?;
        series.push(density.values().iter().map(|r| r.powf(p)).sum::<f64>());
    }
    let n_t = grid.n_steps() as f64;
    let (s0, st) = (series[0], series[grid.n_steps()]);
    let mut violation = f64::NEG_INFINITY;
    for (k, s) in series.iter().enumerate() {
        let theta = k as f64 / n_t;
        violation = violation.max(s - s0.powf(1.0 - theta) * st.powf(theta));
    }
    Ok(LpLogConvexity { exponent: p, series, violation })
}

/// Largest `L^p` norm of the density over time, against the boundary norms.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformLpBound {
    pub exponent: f64,
    /// `‖m^N(·, t_n)‖_p = (Σ_i R_i^p · gap_i)^{1/p}`, per time node.
    pub norms: Vec<f64>,
    pub max_norm: f64,
    pub boundary_max: f64,
    /// `max_norm − boundary_max`; nonpositive (up to tolerance) when the
    /// chord bound with `U(z) = z^p` holds.
    pub slack: f64,
}

pub fn uniform_lp_bound(grid: &TrajectoryGrid, p: f64) -> Result<UniformLpBound> {
    if !(p >= 1.0) {
        return Err(Error::domain(format!("L^p norm needs p >= 1 (got {p})")));
    }
    let mut norms = Vec::with_capacity(grid.n_steps() + 1);
    for k in 0..=grid.n_steps() {
        let state = grid.state(k)?;
        let density = crate::discretization::discrete_density(&state)?;
        let mut sum = 0.0;
        for (r, gap) in density.values().iter().zip(density.gaps()) {
            if gap.is_finite() {
                sum += r.powf(p) * gap;
            }
        }
        norms.push(sum.powf(1.0 / p));
    }
    let max_norm = norms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let boundary_max = norms[0].max(norms[norms.len() - 1]);
    Ok(UniformLpBound { exponent: p, norms, max_norm, boundary_max, slack: max_norm - boundary_max })
}

// ---------------------------------------------------------------------------
// Scalar summaries
// ---------------------------------------------------------------------------

/// Smallest second difference `s[n+1] − 2s[n] + s[n−1]`; `None` below three
/// entries. Nonnegative (up to tolerance) for convex series.
pub fn min_second_difference(series: &[f64]) -> Option<f64> {
    series
        .windows(3)
        .map(|w| w[2] - 2.0 * w[1] + w[0])
        .fold(None, |acc, d| Some(acc.map_or(d, |a: f64| a.min(d))))
}

/// Smallest gap between the endpoint chord and the series,
/// `min_n [ (1 − n/N)·s[0] + (n/N)·s[N] − s[n] ]`; nonnegative (up to
/// tolerance) when the series lies below its chord, as convexity demands.
pub fn min_chord_slack(series: &[f64]) -> Option<f64> {
    if series.len() < 2 {
        return None;
    }
    let n = (series.len() - 1) as f64;
    let (s0, st) = (series[0], series[series.len() - 1]);
    series
        .iter()
        .enumerate()
        .map(|(k, s)| {
            let theta = k as f64 / n;
            (1.0 - theta) * s0 + theta * st - s
        })
        .fold(None, |acc, d| Some(acc.map_or(d, |a: f64| a.min(d))))
}

/// Largest per-step movement `|s[k+1] − s[k]|` over the interior window
/// `k ∈ [len/4, 3·len/4]`, away from the endpoint layers where the fully
/// discrete dynamics is distorted by the pinned rows. `None` when the
/// window holds no step (fewer than two entries or an empty intersection).
pub fn interior_drift(series: &[f64]) -> Option<f64> {
    if series.len() < 2 {
        return None;
    }
    let lo = series.len() / 4;
    let hi = (3 * series.len() / 4).min(series.len() - 2);
    if lo > hi {
        return None;
    }
    (lo..=hi)
        .map(|k| (series[k + 1] - series[k]).abs())
        .fold(None, |acc, d| Some(acc.map_or(d, |a: f64| a.max(d))))
}

// ---------------------------------------------------------------------------
// Aggregate report
// ---------------------------------------------------------------------------

/// Which series to compute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsRequest {
    pub momentum: bool,
    pub energy: bool,
    pub displacement: Vec<ConvexTestFunction>,
    pub lp: Vec<f64>,
    pub el_residual: bool,
}

impl Default for DiagnosticsRequest {
    fn default() -> Self {
        DiagnosticsRequest {
            momentum: true,
            energy: true,
            displacement: vec![
                ConvexTestFunction::Power { p: 2.0 },
                ConvexTestFunction::ExpNeg,
                ConvexTestFunction::Entropy,
            ],
            lp: vec![1.0, 2.0, 4.0],
            el_residual: true,
        }
    }
}

impl DiagnosticsRequest {
    /// The default request restricted to test functions valid on `domain`:
    /// the real line needs `U(0) = 0` because its boundary cells carry zero
    /// density, which rules out `e^{-z}`.
    pub fn default_for(domain: Domain) -> Self {
        let mut request = Self::default();
        if domain == Domain::RealLine {
            request.displacement.retain(|u| u.vanishes_at_zero());
        }
        request
    }

    pub fn validate(&self, domain: Domain) -> Result<()> {
        for u in &self.displacement {
            u.validate()?;
            if domain == Domain::RealLine && !u.vanishes_at_zero() {
                return Err(Error::config(format!(
                    "diagnostics.displacement: {} has U(0) != 0 and cannot \
                     be used on the real line",
                    u.label()
                )));
            }
        }
        for &p in &self.lp {
            if !(p >= 1.0) {
                return Err(Error::config(format!(
                    "diagnostics.lp entries must be >= 1 (got {p})"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentumDiagnostics {
    pub series: Vec<f64>,
    /// `max_k |M^k − M^0|`.
    pub max_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyDiagnostics {
    pub series: Vec<f64>,
    /// Interior-window per-step drift; `None` on degenerate grids.
    pub interior_drift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisplacementDiagnostics {
    pub function: ConvexTestFunction,
    pub series: Vec<f64>,
    pub min_second_difference: Option<f64>,
    pub min_chord_slack: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpDiagnostics {
    pub log_convexity: LpLogConvexity,
    pub uniform_bound: UniformLpBound,
}

/// Per-time CDF sup error against a reference solution.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfError {
    pub time: f64,
    pub sup_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DiagnosticsReport {
    pub momentum: Option<MomentumDiagnostics>,
    pub energy: Option<EnergyDiagnostics>,
    pub displacement: Vec<DisplacementDiagnostics>,
    pub lp: Vec<LpDiagnostics>,
    pub el_residual_max: Option<f64>,
    pub cdf_errors: Vec<CdfError>,
}

/// Computes every requested series on a (normally converged) grid; CDF
/// errors are filled when a reference solution is supplied.
pub fn run_diagnostics(
    spec: &ProblemSpec,
    grid: &TrajectoryGrid,
    request: &DiagnosticsRequest,
    reference: Option<&ReferenceSolution>,
    cdf_times: &[f64],
) -> Result<DiagnosticsReport> {
    request.validate(grid.domain())?;
    grid.validate_feasible()?;
    let mut report = DiagnosticsReport::default();
    if request.momentum {
        let series = momentum_series(spec, grid)?;
        let max_drift = series
            .iter()
            .map(|m| (m - series[0]).abs())
            .fold(0.0, f64::max);
        report.momentum = Some(MomentumDiagnostics { series, max_drift });
    }
    if request.energy {
        let series = energy_series(spec, grid)?;
        let drift = interior_drift(&series);
        report.energy = Some(EnergyDiagnostics { series, interior_drift: drift });
    }
    for u in &request.displacement {
        let series = displacement_series(grid, u)?;
        report.displacement.push(DisplacementDiagnostics {
            function: *u,
            min_second_difference: min_second_difference(&series),
            min_chord_slack: min_chord_slack(&series),
            series,
        });
    }
    for &p in &request.lp {
        report.lp.push(LpDiagnostics {
            log_convexity: lp_logconvexity(grid, p)?,
            uniform_bound: uniform_lp_bound(grid, p)?,
        });
    }
    if request.el_residual {
        report.el_residual_max = Some(max_abs(&euler_lagrange_residual(spec, grid)?));
    }
    if let Some(sol) = reference {
        for &time in cdf_times {
            let k = (time / grid.dt()).round() as usize;
            let k = k.min(grid.n_steps());
            let state = grid.state(k)?;
            let points = cdf_points(&state, grid.time(k));
            report.cdf_errors.push(CdfError {
                time: grid.time(k),
                sup_error: cdf_sup_error(&points, |x, t| sol.cdf(x, t)),
            });
        }
    }
    Ok(report)
}

/// Exact rearrangement of stationarity: for each interior row `k`,
/// `M^k − M^{k−1} + Δt · [Σ_j ∇J_{j,k} + Σ_j V_x(x_j^k, t_k)] = 0`
/// identically — the density terms cancel in the row sum. Exposed for tests
/// and the check layer; returns the largest absolute defect.
pub fn momentum_identity_defect(spec: &ProblemSpec, grid: &TrajectoryGrid) -> Result<f64> {
    let m = momentum_series(spec, grid)?;
    let g = gradient(spec, grid)?;
    let n = grid.n_particles();
    let dt = grid.dt();
    let mut worst = 0.0_f64;
    for k in 1..grid.n_steps() {
        let row = grid.row(k);
        let t = grid.time(k);
        let mut force = 0.0;
        for j in 0..n {
            force += g[(k - 1) * n + j] + spec.potential_x_at(row[j], t);
        }
        worst = worst.max((m[k] - m[k - 1] + dt * force).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::ParticleState;
    use crate::model::{CouplingSpec, HamiltonianSpec, PotentialSpec};
    use crate::optimizer::initial_guess;
    use crate::quantile::DensitySpec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn base_spec(domain: Domain, n: usize, n_t: usize) -> ProblemSpec {
        ProblemSpec {
            domain,
            horizon: 1.0,
            n_particles: n,
            n_time_steps: n_t,
            hamiltonian: HamiltonianSpec::Quadratic,
            coupling: CouplingSpec::QuadraticHalf,
            potential: PotentialSpec::Constant { value: 0.0 },
            initial_density: DensitySpec::Uniform { lo: 0.0, hi: 1.0 },
            terminal_density: DensitySpec::Uniform { lo: 0.0, hi: 1.0 },
        }
    }

    /// Random feasible torus grid: rows share nothing but feasibility.
    fn random_torus_grid(n: usize, n_t: usize, seed: u64) -> TrajectoryGrid {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut positions = Vec::with_capacity((n_t + 1) * n);
        for _ in 0..=n_t {
            let start: f64 = rng.gen_range(-0.3..0.3);
            let raw: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            let mut x = start;
            for g in &raw {
                positions.push(x);
                x += 0.85 * g / total;
            }
        }
        TrajectoryGrid::from_rows(positions, n, n_t, 1.0 / n_t as f64, Domain::Torus).unwrap()
    }

    fn straight_line_grid(domain: Domain, x0: Vec<f64>, xt: Vec<f64>, n_t: usize) -> TrajectoryGrid {
        let spec = base_spec(domain, x0.len(), n_t);
        let a = ParticleState::new(x0, domain).unwrap();
        let b = ParticleState::new(xt, domain).unwrap();
        initial_guess(&spec, &a, &b).unwrap()
    }

    #[test]
    fn momentum_is_constant_on_straight_lines() {
        let grid = straight_line_grid(
            Domain::RealLine,
            vec![0.0, 1.0, 2.5],
            vec![0.4, 1.9, 3.0],
            5,
        );
        let spec = base_spec(Domain::RealLine, 3, 5);
        let m = momentum_series(&spec, &grid).unwrap();
        assert_eq!(m.len(), 5, "one momentum entry per step");
        // Constant velocities (0.4 + 0.9 + 0.5) / T sum to the same total
        // at every step (up to rounding of the interpolated rows).
        for v in &m {
            assert!((v - m[0]).abs() < 1e-12, "momentum {v} differs from {}", m[0]);
        }
        assert!((m[0] - 1.8).abs() < 1e-12, "Σ slopes = 1.8, got {}", m[0]);
    }

    #[test]
    fn momentum_identity_holds_off_stationarity() {
        // The rearranged stationarity identity is pure algebra: it holds on
        // arbitrary feasible grids, converged or not, on both domains.
        let spec = ProblemSpec {
            potential: PotentialSpec::Test1,
            ..base_spec(Domain::Torus, 7, 6)
        };
        let grid = random_torus_grid(7, 6, 41);
        let defect = momentum_identity_defect(&spec, &grid).unwrap();
        assert!(defect <= 1e-9, "torus identity defect {defect:.3e}");

        let line_spec = ProblemSpec {
            potential: PotentialSpec::Test3,
            coupling: CouplingSpec::Linear,
            ..base_spec(Domain::RealLine, 5, 4)
        };
        let grid = straight_line_grid(
            Domain::RealLine,
            vec![-1.0, -0.4, 0.1, 0.8, 1.7],
            vec![-0.7, 0.0, 0.6, 1.5, 2.1],
            4,
        );
        let defect = momentum_identity_defect(&line_spec, &grid).unwrap();
        assert!(defect <= 1e-9, "real-line identity defect {defect:.3e}");
    }

    #[test]
    fn energy_is_constant_without_interaction_or_potential() {
        let spec = ProblemSpec {
            coupling: CouplingSpec::Zero,
            ..base_spec(Domain::RealLine, 4, 8)
        };
        let grid = straight_line_grid(
            Domain::RealLine,
            vec![0.0, 1.0, 2.0, 3.0],
            vec![0.5, 1.2, 2.8, 3.9],
            8,
        );
        let e = energy_series(&spec, &grid).unwrap();
        assert_eq!(e.len(), 8);
        // L'(v)v − L(v) = v²/2 with constant velocities: exactly constant.
        for v in &e {
            assert!((v - e[0]).abs() < 1e-14, "energy {v} vs {}", e[0]);
        }
        let slopes = [0.5, 0.2, 0.8, 0.9];
        let expect: f64 = slopes.iter().map(|s| 0.5 * s * s).sum();
        assert!((e[0] - expect).abs() < 1e-12, "E = {} vs {expect}", e[0]);
    }

    #[test]
    fn displacement_series_is_flat_for_stationary_rows() {
        let x0: Vec<f64> = (0..6).map(|i| 0.05 + i as f64 / 6.0).collect();
        let grid = straight_line_grid(Domain::Torus, x0.clone(), x0, 10);
        for u in [
            ConvexTestFunction::Power { p: 2.0 },
            ConvexTestFunction::ExpNeg,
            ConvexTestFunction::Entropy,
        ] {
            let d = displacement_series(&grid, &u).unwrap();
            assert_eq!(d.len(), 11, "one entry per node");
            for v in &d {
                assert!((v - d[0]).abs() < 1e-13, "{}: {v} vs {}", u.label(), d[0]);
            }
            assert!(min_second_difference(&d).unwrap().abs() < 1e-13);
        }
    }

    #[test]
    fn displacement_power_one_is_total_mass_on_torus() {
        let grid = random_torus_grid(9, 5, 3);
        let d = displacement_series(&grid, &ConvexTestFunction::Power { p: 1.0 }).unwrap();
        for v in &d {
            assert!((v - 1.0).abs() < 1e-12, "Σ R·gap = {v}, want 1");
        }
    }

    #[test]
    fn real_line_rejects_test_functions_positive_at_zero() {
        let grid = straight_line_grid(
            Domain::RealLine,
            vec![0.0, 1.0],
            vec![0.0, 1.0],
            2,
        );
        let err = displacement_series(&grid, &ConvexTestFunction::ExpNeg).unwrap_err();
        assert!(
            err.to_string().contains("U(0)"),
            "unexpected message: {err}"
        );
        // The U(0) = 0 families work and stay finite despite the infinite
        // boundary cells.
        for u in [ConvexTestFunction::Power { p: 2.0 }, ConvexTestFunction::Entropy] {
            let d = displacement_series(&grid, &u).unwrap();
            assert!(d.iter().all(|v| v.is_finite()), "{}: {d:?}", u.label());
        }
    }

    #[test]
    fn power_sums_count_particles_at_p_zero() {
        let grid = random_torus_grid(9, 4, 11);
        let lp = lp_logconvexity(&grid, 0.0).unwrap();
        for s in &lp.series {
            assert_eq!(*s, 9.0, "S_0 must count particles");
        }
        assert!(lp.violation.abs() < 1e-12);
        assert!(lp_logconvexity(&grid, -1.0).is_err());
    }

    #[test]
    fn uniform_rows_give_zero_violation_and_zero_slack() {
        let x0: Vec<f64> = (0..8).map(|i| i as f64 / 8.0).collect();
        let grid = straight_line_grid(Domain::Torus, x0.clone(), x0, 6);
        for p in [1.0, 2.0, 4.0] {
            let lp = lp_logconvexity(&grid, p).unwrap();
            assert!(lp.violation.abs() < 1e-12, "p = {p}: violation {}", lp.violation);
            let ub = uniform_lp_bound(&grid, p).unwrap();
            assert!(ub.slack.abs() < 1e-12, "p = {p}: slack {}", ub.slack);
            assert!((ub.max_norm - ub.boundary_max).abs() < 1e-12);
        }
        // p = 1 on the torus: every norm is the total mass.
        let ub = uniform_lp_bound(&grid, 1.0).unwrap();
        for norm in &ub.norms {
            assert!((norm - 1.0).abs() < 1e-12, "mass norm {norm}");
        }
    }

    #[test]
    fn summaries_on_a_known_convex_sequence() {
        // s[n] = n²: second differences all 2, chord slack 0 at the ends
        // and positive inside.
        let s: Vec<f64> = (0..=6).map(|n| (n * n) as f64).collect();
        assert_eq!(min_second_difference(&s).unwrap(), 2.0);
        assert_eq!(min_chord_slack(&s).unwrap(), 0.0);
        assert!(min_second_difference(&s[..2]).is_none());
        assert!(min_chord_slack(&s[..1]).is_none());
    }

    #[test]
    fn interior_drift_ignores_endpoint_layers() {
        // Large jumps at both ends, 0.5-size steps inside; the window
        // [len/4, 3·len/4] must see only the interior steps.
        let s = [
            0.0, 10.0, 10.5, 11.0, 11.5, 12.0, 12.5, 13.0, 13.5, 14.0, 14.5, 32.0,
        ];
        let drift = interior_drift(&s).unwrap();
        assert_eq!(drift, 0.5, "window must exclude the 10.0 and 17.5 jumps");
        assert!(interior_drift(&s[..1]).is_none());
    }

    #[test]
    fn convexity_guard_accepts_families_and_rejects_bad_exponents() {
        for u in [
            ConvexTestFunction::Power { p: 1.0 },
            ConvexTestFunction::Power { p: 1.5 },
            ConvexTestFunction::Power { p: 4.0 },
            ConvexTestFunction::ExpNeg,
            ConvexTestFunction::Entropy,
        ] {
            u.validate().unwrap();
        }
        assert!(ConvexTestFunction::Power { p: 0.5 }.validate().is_err());
        assert_eq!(ConvexTestFunction::Entropy.value(0.0), 0.0);
    }

    #[test]
    fn report_assembles_all_requested_pieces() {
        let spec = base_spec(Domain::Torus, 6, 4);
        let grid = random_torus_grid(6, 4, 99);
        let request = DiagnosticsRequest::default();
        let sol = crate::exact::reference(crate::exact::ReferenceId::Test1);
        let report =
            run_diagnostics(&spec, &grid, &request, Some(&sol), &[0.0, 0.5, 1.0]).unwrap();
        let momentum = report.momentum.expect("momentum requested");
        assert_eq!(momentum.series.len(), 4);
        let energy = report.energy.expect("energy requested");
        assert_eq!(energy.series.len(), 4);
        assert!(energy.interior_drift.is_some());
        assert_eq!(report.displacement.len(), 3);
        for d in &report.displacement {
            assert_eq!(d.series.len(), 5);
            assert!(d.min_second_difference.is_some());
        }
        assert_eq!(report.lp.len(), 3);
        assert!(report.el_residual_max.is_some());
        assert_eq!(report.cdf_errors.len(), 3);
        for e in &report.cdf_errors {
            assert!(
                e.sup_error.is_finite() && (0.0..=1.0).contains(&e.sup_error),
                "cdf error {} at t = {}",
                e.sup_error,
                e.time
            );
        }
    }

    #[test]
    fn real_line_request_rejects_expneg_upfront() {
        let request = DiagnosticsRequest::default();
        assert!(request.validate(Domain::Torus).is_ok());
        let err = request.validate(Domain::RealLine).unwrap_err();
        assert!(err.to_string().contains("exp_neg"), "got: {err}");
    }
}
