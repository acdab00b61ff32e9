//! Closed-form reference solutions.
//!
//! Three benchmark planning problems with known solutions, used to score
//! computed trajectories and to pin boundary data:
//!
//! * `Test1` (torus): `m(x, t) = 1 + sin(2 pi x) e^{-t-1}`, quadratic-half
//!   coupling. The potential is engineered from the HJ equation,
//!   `V = g(m) + u_t - H(u_x)` with `u = log(e^{1+t} + sin(2 pi x)) / (4 pi^2)`.
//! * `Test2` (real line): a Cauchy profile travelling along
//!   `c(t) = t + t^2/20`, linear coupling, `u = -x - x t / 10`.
//! * `Test3` (real line): a logistic profile travelling along
//!   `c(t) = t + t^3`, linear coupling, `u = -(1 + 3 t^2) x`.
//!
//! Each solution exposes the density `m`, its cumulative distribution `phi`
//! (periodized on the torus), the value function `u`, and the potential
//! family/coupling/Hamiltonian it pairs with.
//! [`verify_reference_consistency`] replays both PDEs through finite
//! differences of these closed forms; it is a transcription check and runs in
//! the test suite for all three solutions.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CouplingSpec, Domain, HamiltonianSpec, PotentialSpec};

const TWO_PI: f64 = 2.0 * PI;

// ---------------------------------------------------------------------------
// Test 1: periodic sinusoidal perturbation
// ---------------------------------------------------------------------------

pub(crate) fn test1_m(x: f64, t: f64) -> f64 {
    1.0 + (TWO_PI * x).sin() * (-t - 1.0).exp()
}

/// Per-period cumulative distribution on [0, 1): `{x} + e^{-1-t} sin^2(pi x) / pi`.
pub(crate) fn test1_cdf(x: f64, t: f64) -> f64 {
    let frac = x - x.floor();
    frac + (-1.0 - t).exp() * (PI * frac).sin().powi(2) / PI
}

pub(crate) fn test1_u(x: f64, t: f64) -> f64 {
    ((1.0 + t).exp() + (TWO_PI * x).sin()).ln() / (4.0 * PI * PI)
}

pub(crate) fn test1_v(x: f64, t: f64) -> f64 {
    let s = (TWO_PI * x).sin();
    let e = (1.0 + t).exp();
    0.125
        * (4.0
            + 1.0 / (PI * PI)
            + 8.0 * s / e
            + 4.0 * s * s / (e * e)
            + (e * e - 1.0) / (PI * PI * (e + s) * (e + s)))
}

pub(crate) fn test1_v_x(x: f64, t: f64) -> f64 {
    let s = (TWO_PI * x).sin();
    let c = (TWO_PI * x).cos();
    let e = (1.0 + t).exp();
    let w = e + s;
    TWO_PI * c / e + TWO_PI * s * c / (e * e) - (e * e - 1.0) * c / (TWO_PI * w * w * w)
}

pub(crate) fn test1_v_xx(x: f64, t: f64) -> f64 {
    let s = (TWO_PI * x).sin();
    let c = (TWO_PI * x).cos();
    let e = (1.0 + t).exp();
    let w = e + s;
    -4.0 * PI * PI * s / e + 4.0 * PI * PI * (4.0 * PI * x).cos() / (e * e)
        + (e * e - 1.0) * (s * w + 3.0 * c * c) / (w * w * w * w)
}

// ---------------------------------------------------------------------------
// Test 2: travelling Cauchy profile on the real line
// ---------------------------------------------------------------------------

fn test2_center(t: f64) -> f64 {
    t + t * t / 20.0
}

pub(crate) fn test2_m(x: f64, t: f64) -> f64 {
    let w = test2_center(t) - x;
    1.0 / (PI * (1.0 + w * w))
}

pub(crate) fn test2_cdf(x: f64, t: f64) -> f64 {
    0.5 - (test2_center(t) - x).atan() / PI
}

pub(crate) fn test2_u(x: f64, t: f64) -> f64 {
    -x - x * t / 10.0
}

pub(crate) fn test2_v(x: f64, t: f64) -> f64 {
    -(10.0 + t) * (10.0 + t) / 200.0 + test2_m(x, t) - x / 10.0
}

pub(crate) fn test2_v_x(x: f64, t: f64) -> f64 {
    let w = test2_center(t) - x;
    let d = 1.0 + w * w;
    2.0 * w / (PI * d * d) - 0.1
}

pub(crate) fn test2_v_xx(x: f64, t: f64) -> f64 {
    let w = test2_center(t) - x;
    let d = 1.0 + w * w;
    2.0 * (3.0 * w * w - 1.0) / (PI * d * d * d)
}

// ---------------------------------------------------------------------------
// Test 3: travelling logistic profile on the real line
// ---------------------------------------------------------------------------

fn test3_center(t: f64) -> f64 {
    t + t * t * t
}

pub(crate) fn test3_m(x: f64, t: f64) -> f64 {
    let w = test3_center(t) - x;
    1.0 / (2.0 + 2.0 * w.cosh())
}

pub(crate) fn test3_cdf(x: f64, t: f64) -> f64 {
    let w = test3_center(t) - x;
    // 1 / (1 + e^w); for large |w| the complementary form avoids overflow.
    if w > 0.0 {
        (-w).exp() / (1.0 + (-w).exp())
    } else {
        1.0 / (1.0 + w.exp())
    }
}

pub(crate) fn test3_u(x: f64, t: f64) -> f64 {
    -(1.0 + 3.0 * t * t) * x
}

pub(crate) fn test3_v(x: f64, t: f64) -> f64 {
    let a = 1.0 + 3.0 * t * t;
    -0.5 * a * a - 6.0 * t * x + test3_m(x, t)
}

pub(crate) fn test3_v_x(x: f64, t: f64) -> f64 {
    let w = test3_center(t) - x;
    let d = 1.0 + w.cosh();
    -6.0 * t + w.sinh() / (2.0 * d * d)
}

pub(crate) fn test3_v_xx(x: f64, t: f64) -> f64 {
    let w = test3_center(t) - x;
    let d = 1.0 + w.cosh();
    (w.cosh() - 2.0) / (2.0 * d * d)
}

// ---------------------------------------------------------------------------
// Reference solution surface
// ---------------------------------------------------------------------------

/// Identifier of a closed-form reference solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceId {
    Test1,
    Test2,
    Test3,
}

impl ReferenceId {
    pub const ALL: [ReferenceId; 3] = [ReferenceId::Test1, ReferenceId::Test2, ReferenceId::Test3];
}

impl std::fmt::Display for ReferenceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ReferenceId::Test1 => "test1",
            ReferenceId::Test2 => "test2",
            ReferenceId::Test3 => "test3",
        })
    }
}

/// A reference solution: closed forms plus the problem families they solve.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub id: ReferenceId,
    pub domain: Domain,
    pub coupling: CouplingSpec,
    pub hamiltonian: HamiltonianSpec,
    pub potential: PotentialSpec,
}

/// Looks up a reference solution by id.
pub fn reference(id: ReferenceId) -> ReferenceSolution {
    match id {
        ReferenceId::Test1 => ReferenceSolution {
            id,
            domain: Domain::Torus,
            coupling: CouplingSpec::QuadraticHalf,
            hamiltonian: HamiltonianSpec::Quadratic,
            potential: PotentialSpec::Test1,
        },
        ReferenceId::Test2 => ReferenceSolution {
            id,
            domain: Domain::RealLine,
            coupling: CouplingSpec::Linear,
            hamiltonian: HamiltonianSpec::Quadratic,
            potential: PotentialSpec::Test2,
        },
        ReferenceId::Test3 => ReferenceSolution {
            id,
            domain: Domain::RealLine,
            coupling: CouplingSpec::Linear,
            hamiltonian: HamiltonianSpec::Quadratic,
            potential: PotentialSpec::Test3,
        },
    }
}

impl ReferenceSolution {
    /// Density `m(x, t)`.
    pub fn m(&self, x: f64, t: f64) -> f64 {
        match self.id {
            ReferenceId::Test1 => test1_m(x, t),
            ReferenceId::Test2 => test2_m(x, t),
            ReferenceId::Test3 => test3_m(x, t),
        }
    }

    /// Cumulative distribution `phi(x, t)`; per-period (with `{x}`) on the
    /// torus, global on the real line.
    pub fn cdf(&self, x: f64, t: f64) -> f64 {
        match self.id {
            ReferenceId::Test1 => test1_cdf(x, t),
            ReferenceId::Test2 => test2_cdf(x, t),
            ReferenceId::Test3 => test3_cdf(x, t),
        }
    }

    /// Value function `u(x, t)` of the HJ equation.
    pub fn u(&self, x: f64, t: f64) -> f64 {
        match self.id {
            ReferenceId::Test1 => test1_u(x, t),
            ReferenceId::Test2 => test2_u(x, t),
            ReferenceId::Test3 => test3_u(x, t),
        }
    }

    /// Sample points for consistency checks, interior to the region where
    /// the density is non-negligible.
    fn sample_xs(&self) -> Vec<f64> {
        match self.domain {
            Domain::Torus => (0..=20).map(|k| 0.025 + 0.95 * k as f64 / 20.0).collect(),
            Domain::RealLine => (0..=24).map(|k| -3.0 + 7.0 * k as f64 / 24.0).collect(),
        }
    }
}

/// Replays both PDEs through central finite differences of the closed forms
/// and checks unit mass. Returns the worst residual seen, or an error
/// describing the first check that failed.
///
/// This is a transcription check: it guards the implementation of the
/// formulas, not the formulas' derivation.
pub fn verify_reference_consistency(id: ReferenceId) -> Result<f64> {
    let sol = reference(id);
    let h = 1e-4;
    let ts = [0.05, 0.3, 0.55, 0.8, 0.95];
    let mut worst: f64 = 0.0;

    for &x in &sol.sample_xs() {
        for &t in &ts {
            let m = sol.m(x, t);
            let u_t = (sol.u(x, t + h) - sol.u(x, t - h)) / (2.0 * h);
            let u_x = (sol.u(x + h, t) - sol.u(x - h, t)) / (2.0 * h);
            let hj = -u_t + sol.hamiltonian.hamiltonian(u_x) + sol.potential.v(x, t)
                - sol.coupling.g(m);
            if hj.abs() > 1e-4 {
                return Err(Error::domain(format!(
                    "{id}: HJ residual {hj:.3e} at (x, t) = ({x}, {t})"
                )));
            }
            // Transport: m_t - (m H'(u_x))_x = 0 with H' = p for the
            // quadratic Hamiltonian all references pair with.
            let m_t = (sol.m(x, t + h) - sol.m(x, t - h)) / (2.0 * h);
            let flux = |y: f64| {
                let uy = (sol.u(y + h, t) - sol.u(y - h, t)) / (2.0 * h);
                sol.m(y, t) * uy
            };
            let tr = m_t - (flux(x + h) - flux(x - h)) / (2.0 * h);
            if tr.abs() > 1e-4 {
                return Err(Error::domain(format!(
                    "{id}: transport residual {tr:.3e} at (x, t) = ({x}, {t})"
                )));
            }
            worst = worst.max(hj.abs()).max(tr.abs());

            // The CDF is an antiderivative of the density.
            let phi_x = (sol.cdf(x + h, t) - sol.cdf(x - h, t)) / (2.0 * h);
            if (phi_x - m).abs() > 1e-6 * (1.0 + m.abs()) {
                return Err(Error::domain(format!(
                    "{id}: cdf slope {phi_x:.6e} != density {m:.6e} at ({x}, {t})"
                )));
            }

            // Closed-form V_x against differences of V.
            let v_fd = (sol.potential.v(x + h, t) - sol.potential.v(x - h, t)) / (2.0 * h);
            let v_x = sol.potential.v_x(x, t);
            if (v_fd - v_x).abs() > 1e-6 * (1.0 + v_x.abs()) {
                return Err(Error::domain(format!(
                    "{id}: V_x {v_x:.6e} != FD {v_fd:.6e} at ({x}, {t})"
                )));
            }
        }
    }

    // Unit mass at a few times: exact CDF spans [0, 1] over the domain, and
    // quadrature of m must agree.
    for &t in &[0.0, 0.5, 1.0] {
        let mass = match sol.domain {
            Domain::Torus => {
                let n = 2000;
                let dx = 1.0 / n as f64;
                // Midpoint rule; spectral accuracy for the smooth periodic m.
                (0..n).map(|k| sol.m((k as f64 + 0.5) * dx, t)).sum::<f64>() * dx
            }
            Domain::RealLine => {
                // Integrate where the CDF says the mass lives, add the exact
                // tails from the CDF itself.
                let (lo, hi) = (-60.0, 60.0);
                let n = 6000;
                let dx = (hi - lo) / n as f64;
                let body =
                    (0..n).map(|k| sol.m(lo + (k as f64 + 0.5) * dx, t)).sum::<f64>() * dx;
                body + sol.cdf(lo, t) + (1.0 - sol.cdf(hi, t))
            }
        };
        if (mass - 1.0).abs() > 1e-6 {
            return Err(Error::domain(format!("{id}: mass at t = {t} is {mass}")));
        }
    }
    Ok(worst)
}
