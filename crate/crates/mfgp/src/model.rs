//! Problem data: domain, Hamiltonian, coupling, potential.
//!
//! A planning problem couples a Hamilton–Jacobi equation with a transport
//! equation through a local coupling `g(m)` and prescribes the density at both
//! ends of the time horizon:
//!
//! ```text
//!   -u_t + H(u_x) + V(x, t) = g(m),      m_t - (m H'(u_x))_x = 0,
//!   m(x, 0) = m_0(x),                    m(x, T) = m_T(x).
//! ```
//!
//! The particle method never touches `H` or `g` directly. It works with two
//! derived functions:
//!
//! * the Lagrangian `L(v) = sup_p [-p v - H(p)]` (a convex conjugate with the
//!   sign convention of trajectories moving against the dual slope), and
//! * the enthalpy `G` defined by `G'(r) = r^{-2} \int_0^r s g'(s) ds`,
//!   normalized so `G(0+) = 0`. Convexity of `G` is what makes the particle
//!   objective convex; the identity `r G''(r) + 2 G'(r) = g'(r)` ties it back
//!   to the coupling.
//!
//! The flux `B(r) = G'(r) r^2` appears in the optimality system: at a
//! minimizer each particle obeys `L''(v) x'' = N (B(R_{i+1}) - B(R_i)) - V_x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact;

/// Spatial domain of the state space.
///
/// `Torus` is the unit circle `R/Z`; particle positions are stored *lifted*
/// to the real line with the span constraint `x_N - x_1 < 1`, and wrap only
/// on output. `RealLine` is the whole line; the outermost density gaps are
/// infinite and carry density zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Torus,
    RealLine,
}

impl Domain {
    /// Wraps a lifted coordinate to the fundamental period. Identity on the
    /// real line.
    pub fn wrap(self, x: f64) -> f64 {
        match self {
            Domain::Torus => x.rem_euclid(1.0),
            Domain::RealLine => x,
        }
    }
}

// ---------------------------------------------------------------------------
// Hamiltonian and Lagrangian
// ---------------------------------------------------------------------------

/// Hamiltonian family `H(p)`.
///
/// Only convex, superlinear-or-compactly-supported Hamiltonians are
/// representable; each variant carries its own validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum HamiltonianSpec {
    /// `H(p) = p^2 / 2`. Conjugate: `L(v) = v^2 / 2`.
    Quadratic,
    /// `H(p) = |p|^a / a` with `a > 1`. Conjugate: `L(v) = |v|^{a'} / a'`
    /// with `1/a + 1/a' = 1`.
    PowerLaw { exponent: f64 },
    /// Convex samples `(p_k, H(p_k))` interpolated linearly; the conjugate is
    /// maximized numerically (golden section over a doubling bracket).
    Tabulated { ps: Vec<f64>, hs: Vec<f64> },
}

impl HamiltonianSpec {
    /// Validates family parameters. Messages name the offending field.
    pub fn validate(&self) -> Result<()> {
        match self {
            HamiltonianSpec::Quadratic => Ok(()),
            HamiltonianSpec::PowerLaw { exponent } => {
                if !exponent.is_finite() || *exponent <= 1.0 {
                    return Err(Error::config(format!(
                        "hamiltonian.exponent must be > 1 (got {exponent})"
                    )));
                }
                Ok(())
            }
            HamiltonianSpec::Tabulated { ps, hs } => {
                if ps.len() != hs.len() {
                    return Err(Error::config("hamiltonian.ps and hamiltonian.hs lengths differ"));
                }
                if ps.len() < 3 {
                    return Err(Error::config("hamiltonian tabulation needs at least 3 samples"));
                }
                if ps.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::config("hamiltonian.ps must be strictly increasing"));
                }
                if ps.iter().chain(hs.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::config("hamiltonian samples must be finite"));
                }
                // Discrete convexity: slopes must be non-decreasing.
                let scale = hs.iter().fold(1.0_f64, |a, h| a.max(h.abs()));
                for w in 0..ps.len() - 2 {
                    let s0 = (hs[w + 1] - hs[w]) / (ps[w + 1] - ps[w]);
                    let s1 = (hs[w + 2] - hs[w + 1]) / (ps[w + 2] - ps[w + 1]);
                    if s1 - s0 < -1e-9 * scale {
                        return Err(Error::config(format!(
                            "hamiltonian samples are not convex near p = {}",
                            ps[w + 1]
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Evaluates `H(p)`. Tabulated Hamiltonians are `+inf` outside their
    /// sample range (the conjugate sees a compactly supported `H`).
    pub fn hamiltonian(&self, p: f64) -> f64 {
        match self {
            HamiltonianSpec::Quadratic => 0.5 * p * p,
            HamiltonianSpec::PowerLaw { exponent } => p.abs().powf(*exponent) / exponent,
            HamiltonianSpec::Tabulated { ps, hs } => {
                if p < ps[0] || p > ps[ps.len() - 1] {
                    return f64::INFINITY;
                }
                let k = match ps.binary_search_by(|q| q.partial_cmp(&p).unwrap()) {
                    Ok(k) => return hs[k],
                    Err(k) => k - 1,
                };
                let w = (p - ps[k]) / (ps[k + 1] - ps[k]);
                hs[k] * (1.0 - w) + hs[k + 1] * w
            }
        }
    }

    /// The Lagrangian `L(v) = sup_p [-p v - H(p)]`.
    pub fn lagrangian(&self, v: f64) -> Result<f64> {
        match self {
            HamiltonianSpec::Quadratic => Ok(0.5 * v * v),
            HamiltonianSpec::PowerLaw { exponent } => {
                let ac = conjugate_exponent(*exponent);
                Ok(v.abs().powf(ac) / ac)
            }
            HamiltonianSpec::Tabulated { .. } => Ok(self.conjugate_numeric(v)?.0),
        }
    }

    /// `L'(v)`. For tabulated Hamiltonians this is `-p*(v)` where `p*` is the
    /// maximizer of the conjugate sup (envelope theorem), so it inherits the
    /// maximizer's accuracy rather than a finite-difference step's.
    pub fn lagrangian_prime(&self, v: f64) -> Result<f64> {
        match self {
            HamiltonianSpec::Quadratic => Ok(v),
            HamiltonianSpec::PowerLaw { exponent } => {
                let ac = conjugate_exponent(*exponent);
                Ok(v.signum() * v.abs().powf(ac - 1.0))
            }
            HamiltonianSpec::Tabulated { .. } => Ok(-self.conjugate_numeric(v)?.1),
        }
    }

    /// `L''(v)`. Divergent points (power-law conjugates with exponent below 2
    /// at `v = 0`) return `+inf`; piecewise-linear tabulations return 0 away
    /// from kinks.
    pub fn lagrangian_second(&self, v: f64) -> Result<f64> {
        match self {
            HamiltonianSpec::Quadratic => Ok(1.0),
            HamiltonianSpec::PowerLaw { exponent } => {
                let ac = conjugate_exponent(*exponent);
                if v == 0.0 {
                    return Ok(if ac > 2.0 {
                        0.0
                    } else if ac == 2.0 {
                        1.0
                    } else {
                        f64::INFINITY
                    });
                }
                Ok((ac - 1.0) * v.abs().powf(ac - 2.0))
            }
            HamiltonianSpec::Tabulated { .. } => {
                let h = 1e-6 * (1.0 + v.abs());
                let lp = self.lagrangian_prime(v + h)?;
                let lm = self.lagrangian_prime(v - h)?;
                Ok((lp - lm) / (2.0 * h))
            }
        }
    }

    /// Golden-section maximization of `p -> -p v - H(p)` over a bracket
    /// `[-P, P]` that doubles until the maximizer is interior (or the bracket
    /// covers the whole sample range). Returns `(L(v), p*)`.
    fn conjugate_numeric(&self, v: f64) -> Result<(f64, f64)> {
        let (p_min, p_max) = match self {
            HamiltonianSpec::Tabulated { ps, .. } => (ps[0], ps[ps.len() - 1]),
            // Closed-form families never take this path, but keep the numeric
            // route total: superlinear growth always brackets.
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        };
        let phi = |p: f64| -p * v - self.hamiltonian(p);
        let mut half_width = 1.0_f64;
        loop {
            let lo = (-half_width).max(p_min);
            let hi = half_width.min(p_max);
            if !(hi > lo) {
                return Err(Error::domain("empty conjugate bracket"));
            }
            let (p_star, val) = golden_max(phi, lo, hi);
            let margin = 1e-9 * (hi - lo);
            let at_left = p_star - lo <= margin && lo > p_min;
            let at_right = hi - p_star <= margin && hi < p_max;
            if !at_left && !at_right {
                if !val.is_finite() {
                    return Err(Error::LegendreUnbounded { v });
                }
                return Ok((val, p_star));
            }
            half_width *= 2.0;
            if half_width > 1e12 {
                return Err(Error::LegendreUnbounded { v });
            }
        }
    }
}

fn conjugate_exponent(a: f64) -> f64 {
    a / (a - 1.0)
}

/// Golden-section search for the maximum of a concave `f` on `[lo, hi]`.
/// Returns `(argmax, max)` with the argmax located to ~1e-12 of the width.
fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    // 0.618^k < 1e-13 at k = 63; a fixed count keeps this allocation-free
    // and deterministic.
    for _ in 0..96 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    let p = 0.5 * (a + b);
    (p, f(p))
}

/// Free-function form of the conjugate, mirroring the method.
pub fn legendre_transform(h: &HamiltonianSpec, v: f64) -> Result<f64> {
    h.lagrangian(v)
}

// ---------------------------------------------------------------------------
// Coupling and enthalpy
// ---------------------------------------------------------------------------

/// Coupling family `g(m)`.
///
/// All families keep `s g'(s)` integrable near zero and `g` non-decreasing,
/// which is exactly what the derived enthalpy needs to exist and be convex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CouplingSpec {
    /// `g(m) = m`; enthalpy `G(r) = r/2`.
    Linear,
    /// `g(m) = m^2/2`; enthalpy `G(r) = r^2/6`.
    QuadraticHalf,
    /// `g(m) = c m^alpha` with `alpha >= 1`, `c > 0`;
    /// enthalpy `G(r) = c r^alpha / (alpha + 1)`.
    Power { exponent: f64, coefficient: f64 },
    /// `g = 0`; decouples the particles (pure optimal transport with
    /// potential).
    Zero,
}

impl CouplingSpec {
    /// Validates family parameters.
    pub fn validate(&self) -> Result<()> {
        if let CouplingSpec::Power { exponent, coefficient } = self {
            if !exponent.is_finite() || *exponent < 1.0 {
                return Err(Error::config(format!(
                    "coupling.exponent must be >= 1 (got {exponent})"
                )));
            }
            if !coefficient.is_finite() || *coefficient <= 0.0 {
                return Err(Error::config(format!(
                    "coupling.coefficient must be > 0 (got {coefficient})"
                )));
            }
        }
        // Numerical convexity check of the derived G on a log-spaced grid.
        // Redundant for the closed families (each is convex by inspection)
        // but cheap, and it would catch a bad closed form immediately.
        let mut r = 1e-4;
        while r <= 1e4 {
            let h = 1e-3 * r;
            let second = self.enthalpy(r - h).unwrap() - 2.0 * self.enthalpy(r).unwrap()
                + self.enthalpy(r + h).unwrap();
            let scale = self.enthalpy(r).unwrap().abs().max(1e-300);
            if second < -1e-7 * scale {
                return Err(Error::config(format!(
                    "coupling enthalpy is not convex near r = {r}"
                )));
            }
            r *= 10.0;
        }
        Ok(())
    }

    /// `g(m)`.
    pub fn g(&self, m: f64) -> f64 {
        match self {
            CouplingSpec::Linear => m,
            CouplingSpec::QuadraticHalf => 0.5 * m * m,
            CouplingSpec::Power { exponent, coefficient } => coefficient * m.powf(*exponent),
            CouplingSpec::Zero => 0.0,
        }
    }

    /// `g'(m)`.
    pub fn g_prime(&self, m: f64) -> f64 {
        match self {
            CouplingSpec::Linear => 1.0,
            CouplingSpec::QuadraticHalf => m,
            CouplingSpec::Power { exponent, coefficient } => {
                coefficient * exponent * m.powf(exponent - 1.0)
            }
            CouplingSpec::Zero => 0.0,
        }
    }

    /// Enthalpy `G(r)`, normalized so `G(0+) = 0`. Accepts `r = 0` (the
    /// boundary gaps on the real line evaluate there).
    pub fn enthalpy(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::domain(format!("enthalpy needs r >= 0 (got {r})")));
        }
        Ok(match self {
            CouplingSpec::Linear => 0.5 * r,
            CouplingSpec::QuadraticHalf => r * r / 6.0,
            CouplingSpec::Power { exponent, coefficient } => {
                coefficient * r.powf(*exponent) / (exponent + 1.0)
            }
            CouplingSpec::Zero => 0.0,
        })
    }

    /// `G'(r) = r^{-2} \int_0^r s g'(s) ds`.
    pub fn enthalpy_prime(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::domain(format!("enthalpy_prime needs r >= 0 (got {r})")));
        }
        Ok(match self {
            CouplingSpec::Linear => 0.5,
            CouplingSpec::QuadraticHalf => r / 3.0,
            CouplingSpec::Power { exponent, coefficient } => {
                coefficient * exponent * r.powf(exponent - 1.0) / (exponent + 1.0)
            }
            CouplingSpec::Zero => 0.0,
        })
    }

    /// `G''(r)`.
    pub fn enthalpy_second(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::domain(format!("enthalpy_second needs r >= 0 (got {r})")));
        }
        Ok(match self {
            CouplingSpec::Linear | CouplingSpec::Zero => 0.0,
            CouplingSpec::QuadraticHalf => 1.0 / 3.0,
            CouplingSpec::Power { exponent, coefficient } => {
                coefficient * exponent * (exponent - 1.0) * r.powf(exponent - 2.0)
                    / (exponent + 1.0)
            }
        })
    }

    /// Quadrature route to the enthalpy, independent of the closed forms
    /// above (it sees only `g`); exists to verify them and would serve a
    /// sampled coupling if one were ever added. The enthalpy is the double
    /// integral of `u^{-2} \int_0^u s g'(s) ds`; integrating by parts twice
    /// collapses it to the running average
    /// `G(r) = r^{-1} \int_0^r (g(s) - g(0)) ds`, done by adaptive Simpson.
    /// The averaged form stays bounded even for couplings whose derivative
    /// blows up at zero density (powers below one).
    pub fn enthalpy_quadrature(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::domain(format!("enthalpy needs r >= 0 (got {r})")));
        }
        if r == 0.0 {
            return Ok(0.0);
        }
        let g0 = self.g(0.0);
        Ok(adaptive_simpson(&|s| self.g(s) - g0, 0.0, r, 1e-12) / r)
    }
}

/// Adaptive Simpson quadrature targeting accuracy `tol` relative to the
/// integral's coarse magnitude, so small integrals are resolved as sharply
/// as large ones. Each panel gets an error budget proportional to its width
/// (the budgets sum to `15 tol |I|` over any partition), which keeps weak
/// endpoint singularities from forcing panel-relative accuracy the scheme
/// cannot reach; accepted panels add the Richardson correction.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        fm: f64,
        budget_per_width: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (left, flm) = simpson(f, a, fa, m, fm);
        let (right, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= budget_per_width * (b - a) {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, flm, budget_per_width, depth - 1)
            + recurse(f, m, fm, b, fb, right, frm, budget_per_width, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let (fa, fb) = (f(a), f(b));
    let (whole, fm) = simpson(f, a, fa, b, fb);
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    let budget_per_width = 15.0 * tol * scale / (b - a).abs();
    recurse(f, a, fa, b, fb, whole, fm, budget_per_width, 48)
}

/// Flux `B(r) = G'(r) r^2`, the quantity whose particle-index differences
/// drive the optimality system. Strictly positive densities only.
pub fn flux_b(coupling: &CouplingSpec, r: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::domain(format!("flux needs r > 0 (got {r})")));
    }
    Ok(coupling.enthalpy_prime(r)? * r * r)
}

/// Flux extended by its boundary limit `B(0+) = 0`, used for the vanished
/// outermost gaps on the real line.
pub(crate) fn flux_b_or_zero(coupling: &CouplingSpec, r: f64) -> Result<f64> {
    if r == 0.0 {
        return Ok(0.0);
    }
    flux_b(coupling, r)
}

// ---------------------------------------------------------------------------
// Potential
// ---------------------------------------------------------------------------

/// Potential family `V(x, t)` with closed-form `V_x` and `V_xx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PotentialSpec {
    /// Space- and time-independent `V = value`; the conserved-quantity
    /// statements all assume this family.
    Constant { value: f64 },
    /// The potential paired with the periodic benchmark density
    /// `m = 1 + sin(2 pi x) e^{-t-1}`.
    Test1,
    /// The potential paired with the travelling Cauchy benchmark.
    Test2,
    /// The potential paired with the travelling logistic benchmark.
    Test3,
    /// `V(x, t) = sum_j c_j(t) x^j` with `c_j(t) = sum_k coeffs[j][k] t^k`.
    /// Outer index is the x-power, inner the t-power.
    PolynomialInX { coeffs: Vec<Vec<f64>> },
}

impl PotentialSpec {
    /// Validates the family against the domain: a potential on the torus
    /// must be 1-periodic in x.
    pub fn validate(&self, domain: Domain) -> Result<()> {
        match self {
            PotentialSpec::Constant { value } => {
                if !value.is_finite() {
                    return Err(Error::config("potential.value must be finite"));
                }
            }
            PotentialSpec::PolynomialInX { coeffs } => {
                if coeffs.iter().flatten().any(|c| !c.is_finite()) {
                    return Err(Error::config("potential.coeffs must be finite"));
                }
                let x_degree = coeffs
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.iter().any(|&v| v != 0.0))
                    .map(|(j, _)| j)
                    .max()
                    .unwrap_or(0);
                if domain == Domain::Torus && x_degree >= 1 {
                    return Err(Error::config(
                        "potential.coeffs: a non-constant polynomial in x is not periodic, \
                         so it cannot be used on the torus",
                    ));
                }
            }
            PotentialSpec::Test1 => {}
            PotentialSpec::Test2 | PotentialSpec::Test3 => {
                if domain == Domain::Torus {
                    return Err(Error::config(
                        "potential: this family is not periodic, so it cannot be used on \
                         the torus",
                    ));
                }
            }
        }
        Ok(())
    }

    /// `V(x, t)`. Callers pass wrapped coordinates on the torus.
    pub fn v(&self, x: f64, t: f64) -> f64 {
        match self {
            PotentialSpec::Constant { value } => *value,
            PotentialSpec::Test1 => exact::test1_v(x, t),
            PotentialSpec::Test2 => exact::test2_v(x, t),
            PotentialSpec::Test3 => exact::test3_v(x, t),
            PotentialSpec::PolynomialInX { coeffs } => {
                let mut acc = 0.0;
                for coeff in coeffs.iter().rev() {
                    acc = acc * x + poly_eval(coeff, t);
                }
                acc
            }
        }
    }

    /// `V_x(x, t)`.
    pub fn v_x(&self, x: f64, t: f64) -> f64 {
        match self {
            PotentialSpec::Constant { .. } => 0.0,
            PotentialSpec::Test1 => exact::test1_v_x(x, t),
            PotentialSpec::Test2 => exact::test2_v_x(x, t),
            PotentialSpec::Test3 => exact::test3_v_x(x, t),
            PotentialSpec::PolynomialInX { coeffs } => {
                let mut acc = 0.0;
                for (j, coeff) in coeffs.iter().enumerate().skip(1).rev() {
                    acc = acc * x + j as f64 * poly_eval(coeff, t);
                }
                acc
            }
        }
    }

    /// `V_xx(x, t)`.
    pub fn v_xx(&self, x: f64, t: f64) -> f64 {
        match self {
            PotentialSpec::Constant { .. } => 0.0,
            PotentialSpec::Test1 => exact::test1_v_xx(x, t),
            PotentialSpec::Test2 => exact::test2_v_xx(x, t),
            PotentialSpec::Test3 => exact::test3_v_xx(x, t),
            PotentialSpec::PolynomialInX { coeffs } => {
                let mut acc = 0.0;
                for (j, coeff) in coeffs.iter().enumerate().skip(2).rev() {
                    acc = acc * x + (j * (j - 1)) as f64 * poly_eval(coeff, t);
                }
                acc
            }
        }
    }

    /// True when the potential is constant in both arguments (the hypothesis
    /// of every conservation statement).
    pub fn is_constant(&self) -> bool {
        match self {
            PotentialSpec::Constant { .. } => true,
            PotentialSpec::PolynomialInX { coeffs } => coeffs
                .iter()
                .enumerate()
                .all(|(j, c)| j == 0 && c.len() <= 1 || c.iter().all(|&v| v == 0.0)),
            _ => false,
        }
    }
}

fn poly_eval(coeffs: &[f64], t: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * t + c)
}

// ---------------------------------------------------------------------------
// Problem spec
// ---------------------------------------------------------------------------

/// A complete planning problem instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub domain: Domain,
    /// Time horizon `T > 0`.
    #[serde(rename = "T")]
    pub horizon: f64,
    /// Particle count `N >= 2`.
    #[serde(rename = "N")]
    pub n_particles: usize,
    /// Time step count `N_T >= 2`; the grid has `N_T + 1` rows.
    #[serde(rename = "N_T")]
    pub n_time_steps: usize,
    pub hamiltonian: HamiltonianSpec,
    pub coupling: CouplingSpec,
    pub potential: PotentialSpec,
    pub initial_density: crate::quantile::DensitySpec,
    pub terminal_density: crate::quantile::DensitySpec,
}

impl ProblemSpec {
    /// Mass per particle `1/N`.
    pub fn delta_n(&self) -> f64 {
        1.0 / self.n_particles as f64
    }

    /// Time step `T / N_T`.
    pub fn dt(&self) -> f64 {
        self.horizon / self.n_time_steps as f64
    }

    /// Validates every component; error messages name fields.
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::config(format!("T must be > 0 (got {})", self.horizon)));
        }
        if self.n_particles < 2 {
            return Err(Error::config(format!(
                "N must be >= 2 (got {})",
                self.n_particles
            )));
        }
        if self.n_time_steps < 2 {
            return Err(Error::config(format!(
                "N_T must be >= 2 (got {})",
                self.n_time_steps
            )));
        }
        self.hamiltonian.validate()?;
        self.coupling.validate()?;
        self.potential.validate(self.domain)?;
        self.initial_density.validate(self.domain)?;
        self.terminal_density.validate(self.domain)?;
        Ok(())
    }

    /// Evaluates the potential with torus coordinates wrapped first, so
    /// lifted representatives see bit-identical values across periods.
    pub fn potential_at(&self, x: f64, t: f64) -> f64 {
        self.potential.v(self.domain.wrap(x), t)
    }

    /// `V_x` with the same wrapping convention as [`Self::potential_at`].
    pub fn potential_x_at(&self, x: f64, t: f64) -> f64 {
        self.potential.v_x(self.domain.wrap(x), t)
    }

    /// `V_xx` with the same wrapping convention as [`Self::potential_at`].
    pub fn potential_xx_at(&self, x: f64, t: f64) -> f64 {
        self.potential.v_xx(self.domain.wrap(x), t)
    }
}
