//! Quantile atomization and CDF reconstruction.
//!
//! Boundary densities enter the particle method only through their quantiles:
//! particle `i` of `N` is placed at `F^{-1}(q_i)` with levels
//! `q_i = i/N - q_offset`. The default offset `1/(2N)` centers each particle
//! in its mass cell (midpoint levels), so consecutive particles always bound
//! mass `1/N` — on the torus this reproduces the canonical atomization up to
//! a rotation of the level origin.
//!
//! Inversion is by bisection on the CDF, maintaining `F(lo) < q <= F(hi)`;
//! on a plateau (a stretch of zero density) this converges to the *left*
//! endpoint, i.e. the generalized inverse `inf {x : F(x) >= q}`.
//!
//! The reverse direction, [`cdf_points`], reads a particle row back as an
//! empirical CDF `(x_i, i/N)` for scoring against a reference distribution.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::discretization::ParticleState;
use crate::error::{Error, Result};
use crate::exact::{self, ReferenceId};
use crate::model::Domain;

/// Absolute `x`-tolerance of the bisection inversion.
pub const INVERSION_TOL: f64 = 1e-12;

/// Gaps at or below this are treated as coincident particles — the cone of
/// ordered configurations has no usable interior there.
pub const DEGENERATE_GAP: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Density specifications
// ---------------------------------------------------------------------------

/// A boundary density, specified in one of three ways.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DensitySpec {
    /// Uniform on `[lo, hi]` (real line) or on the whole period (torus,
    /// where `lo`/`hi` default to 0 and 1).
    Uniform {
        #[serde(default)]
        lo: f64,
        #[serde(default = "one")]
        hi: f64,
    },
    /// Piecewise-linear density samples on an interval. `path` loads a
    /// two-column CSV (`x, density`); inline `xs`/`densities` bypass the
    /// filesystem. Samples are renormalized to unit mass on load.
    Tabulated {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        path: Option<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        xs: Vec<f64>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        densities: Vec<f64>,
    },
    /// A reference solution's density at a fixed time; the CDF is closed
    /// form but has no analytic inverse, so inversion is numeric.
    Reference { id: ReferenceId, time: f64 },
}

fn one() -> f64 {
    1.0
}

/// A tabulated density after loading: sorted sample abscissae, non-negative
/// values, unit mass, and the cumulative trapezoid alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct TabulatedDensity {
    pub xs: Vec<f64>,
    pub densities: Vec<f64>,
    /// `cum[k] = \int_{xs[0]}^{xs[k]} density` (trapezoid rule, exact for
    /// the piecewise-linear interpolant); `cum.last() == 1` after
    /// renormalization.
    cum: Vec<f64>,
}

impl TabulatedDensity {
    /// Builds from samples: validates, then renormalizes to unit mass.
    pub fn new(xs: Vec<f64>, mut densities: Vec<f64>) -> Result<Self> {
        if xs.len() != densities.len() {
            return Err(Error::TabulatedData(format!(
                "{} abscissae vs {} density values",
                xs.len(),
                densities.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::TabulatedData("need at least 2 samples".into()));
        }
        if xs.iter().any(|v| !v.is_finite()) || densities.iter().any(|v| !v.is_finite()) {
            return Err(Error::TabulatedData("samples must be finite".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::TabulatedData("x column must be strictly increasing".into()));
        }
        if let Some(d) = densities.iter().find(|&&d| d < 0.0) {
            return Err(Error::TabulatedData(format!("negative density value {d}")));
        }
        let mass: f64 = xs
            .windows(2)
            .zip(densities.windows(2))
            .map(|(x, d)| 0.5 * (d[0] + d[1]) * (x[1] - x[0]))
            .sum();
        if !(mass > 0.0) {
            return Err(Error::TabulatedData("total mass must be positive".into()));
        }
        for d in &mut densities {
            *d /= mass;
        }
        let mut cum = Vec::with_capacity(xs.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for k in 1..xs.len() {
            acc += 0.5 * (densities[k - 1] + densities[k]) * (xs[k] - xs[k - 1]);
            cum.push(acc);
        }
        Ok(TabulatedDensity { xs, densities, cum })
    }

    /// Parses the two-column CSV format (`x, density`; optional header).
    pub fn from_csv_str(text: &str) -> Result<Self> {
        let mut xs = Vec::new();
        let mut ds = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',').map(str::trim);
            let (a, b) = (parts.next().unwrap_or(""), parts.next().unwrap_or(""));
            if parts.next().is_some() {
                return Err(Error::TabulatedData(format!(
                    "line {}: expected two columns",
                    lineno + 1
                )));
            }
            match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(d)) => {
                    xs.push(x);
                    ds.push(d);
                }
                _ if lineno == 0 => continue, // header row
                _ => {
                    return Err(Error::TabulatedData(format!(
                        "line {}: cannot parse '{line}'",
                        lineno + 1
                    )))
                }
            }
        }
        TabulatedDensity::new(xs, ds)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_csv_str(&text)
    }

    /// CDF of the piecewise-linear interpolant (piecewise quadratic).
    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return 0.0;
        }
        if x >= self.xs[n - 1] {
            return 1.0;
        }
        let k = match self.xs.binary_search_by(|q| q.partial_cmp(&x).unwrap()) {
            Ok(k) => return self.cum[k],
            Err(k) => k - 1,
        };
        let (x0, x1) = (self.xs[k], self.xs[k + 1]);
        let (d0, d1) = (self.densities[k], self.densities[k + 1]);
        let w = (x - x0) / (x1 - x0);
        let d_at = d0 * (1.0 - w) + d1 * w;
        self.cum[k] + 0.5 * (d0 + d_at) * (x - x0)
    }

    /// `\int m(x)^p dx` of the interpolant, exact via 3-point Gauss–Legendre
    /// per segment (degree 5, enough for integer p <= 5).
    pub fn lp_integral(&self, p: f64) -> f64 {
        const NODES: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
        const WEIGHTS: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];
        let mut total = 0.0;
        for k in 0..self.xs.len() - 1 {
            let half = 0.5 * (self.xs[k + 1] - self.xs[k]);
            let (d0, d1) = (self.densities[k], self.densities[k + 1]);
            for (node, weight) in NODES.iter().zip(WEIGHTS) {
                let w = 0.5 * (1.0 + node);
                let d = d0 * (1.0 - w) + d1 * w;
                total += weight * half * d.powf(p);
            }
        }
        total
    }

    pub fn support(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }
}

impl DensitySpec {
    /// Validates the spec for a domain. Tabulated paths are *not* read here;
    /// loading happens in [`DensitySpec::build`].
    pub fn validate(&self, domain: Domain) -> Result<()> {
        match self {
            DensitySpec::Uniform { lo, hi } => {
                if !(hi > lo) {
                    return Err(Error::config(format!(
                        "density.hi must exceed density.lo (got [{lo}, {hi}])"
                    )));
                }
                if domain == Domain::Torus && (hi - lo) > 1.0 + 1e-12 {
                    return Err(Error::config(
                        "density: uniform support wider than the period",
                    ));
                }
                Ok(())
            }
            DensitySpec::Tabulated { path, xs, densities } => {
                if path.is_none() && xs.is_empty() {
                    return Err(Error::config(
                        "density: tabulated family needs either path or inline samples",
                    ));
                }
                if path.is_some() && !xs.is_empty() {
                    return Err(Error::config(
                        "density: give either path or inline samples, not both",
                    ));
                }
                if path.is_none() && xs.len() != densities.len() {
                    return Err(Error::config(
                        "density: xs and densities lengths differ",
                    ));
                }
                Ok(())
            }
            DensitySpec::Reference { id, time } => {
                if !time.is_finite() || *time < 0.0 {
                    return Err(Error::config(format!(
                        "density.time must be >= 0 (got {time})"
                    )));
                }
                if exact::reference(*id).domain != domain {
                    return Err(Error::config(format!(
                        "density: reference {id} lives on a different domain"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Resolves the spec into an evaluable CDF (loading tabulated files,
    /// binding reference times).
    pub fn build(&self, domain: Domain) -> Result<BuiltDensity> {
        self.validate(domain)?;
        match self {
            DensitySpec::Uniform { lo, hi } => Ok(BuiltDensity::Uniform { lo: *lo, hi: *hi }),
            DensitySpec::Tabulated { path, xs, densities } => {
                let tab = match path {
                    Some(p) => TabulatedDensity::from_csv_path(Path::new(p))?,
                    None => TabulatedDensity::new(xs.clone(), densities.clone())?,
                };
                if domain == Domain::Torus {
                    let (lo, hi) = tab.support();
                    if hi - lo > 1.0 + 1e-12 {
                        return Err(Error::config(
                            "density: tabulated support wider than the period",
                        ));
                    }
                }
                Ok(BuiltDensity::Tabulated(tab))
            }
            DensitySpec::Reference { id, time } => Ok(BuiltDensity::Reference {
                solution: exact::reference(*id),
                time: *time,
            }),
        }
    }
}

/// A density spec resolved into something evaluable.
#[derive(Debug, Clone)]
pub enum BuiltDensity {
    Uniform { lo: f64, hi: f64 },
    Tabulated(TabulatedDensity),
    Reference { solution: exact::ReferenceSolution, time: f64 },
}

impl BuiltDensity {
    /// CDF value at `x`. On the torus callers pass coordinates in `[0, 1]`
    /// and get the per-period distribution.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            BuiltDensity::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            BuiltDensity::Tabulated(tab) => tab.cdf(x),
            BuiltDensity::Reference { solution, time } => solution.cdf(x, *time),
        }
    }

    /// A finite abscissa with CDF value 0 if one exists (compact support).
    fn support_lo(&self) -> Option<f64> {
        match self {
            BuiltDensity::Uniform { lo, .. } => Some(*lo),
            BuiltDensity::Tabulated(tab) => Some(tab.support().0),
            BuiltDensity::Reference { .. } => None,
        }
    }

    fn support_hi(&self) -> Option<f64> {
        match self {
            BuiltDensity::Uniform { hi, .. } => Some(*hi),
            BuiltDensity::Tabulated(tab) => Some(tab.support().1),
            BuiltDensity::Reference { .. } => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Atomization
// ---------------------------------------------------------------------------

/// Places `N` particles at quantile levels `i/N - 1/(2N)` (midpoint levels).
pub fn atomize(density: &BuiltDensity, n: usize, domain: Domain) -> Result<ParticleState> {
    atomize_with_offset(density, n, domain, 0.5 / n as f64)
}

/// Places `N` particles at levels `q_i = i/N - q_offset`.
///
/// `q_offset = 1/(2N)` (the default) gives midpoint levels; `q_offset = 0`
/// gives levels `i/N`, matching the level convention of [`cdf_points`]
/// exactly. Requires `0 <= q_offset < 1/N`, and on the real line the top
/// level must be reachable at finite `x` (an unbounded upper tail with
/// `q_offset = 0` is rejected by the bracketing search).
pub fn atomize_with_offset(
    density: &BuiltDensity,
    n: usize,
    domain: Domain,
    q_offset: f64,
) -> Result<ParticleState> {
    if n < 2 {
        return Err(Error::config(format!("N must be >= 2 (got {n})")));
    }
    let delta = 1.0 / n as f64;
    if !(0.0..delta).contains(&q_offset) {
        return Err(Error::config(format!(
            "q_offset must lie in [0, 1/N) (got {q_offset})"
        )));
    }
    let mut xs = Vec::with_capacity(n);
    for i in 1..=n {
        let level = i as f64 * delta - q_offset;
        let x = match domain {
            Domain::Torus => invert_cdf(density, level, 0.0, 1.0)?,
            Domain::RealLine => {
                let (lo, hi) = bracket_level(density, level)?;
                invert_cdf(density, level, lo, hi)?
            }
        };
        xs.push(x);
    }
    // Levels increase, so the generalized inverses are non-decreasing;
    // near-coincident particles mean the density concentrates mass tighter
    // than the inversion can resolve.
    for i in 1..n {
        if xs[i] - xs[i - 1] <= DEGENERATE_GAP {
            return Err(Error::DegenerateBoundary { i, j: i + 1 });
        }
    }
    ParticleState::new(xs, domain)
}

/// Bisection for `inf {x : F(x) >= level}` on a bracket with
/// `F(lo) < level <= F(hi)`.
fn invert_cdf(density: &BuiltDensity, level: f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    while hi - lo > INVERSION_TOL {
        let mid = 0.5 * (lo + hi);
        if density.cdf(mid) >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Grows a bracket `[lo, hi]` geometrically from `[-1, 1]` until
/// `F(lo) < level` and `F(hi) >= level`.
fn bracket_level(density: &BuiltDensity, level: f64) -> Result<(f64, f64)> {
    let mut lo = density.support_lo().unwrap_or(-1.0) - 1.0;
    let mut hi = density.support_hi().unwrap_or(1.0) + 1.0;
    let mut width = hi - lo;
    for _ in 0..80 {
        let (flo, fhi) = (density.cdf(lo), density.cdf(hi));
        if flo < level && fhi >= level {
            return Ok((lo, hi));
        }
        width *= 2.0;
        if flo >= level {
            lo -= width;
        }
        if fhi < level {
            hi += width;
        }
    }
    Err(Error::QuantileBracket {
        level,
        detail: format!("no finite bracket after growth to [{lo:.3e}, {hi:.3e}]"),
    })
}

// ---------------------------------------------------------------------------
// Empirical CDF of a particle row
// ---------------------------------------------------------------------------

/// An empirical CDF: pairs `(x_i, q_i)` with strictly increasing levels in
/// `(0, 1]`, tagged with the time they represent.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfPoints {
    pub pairs: Vec<(f64, f64)>,
    pub time: f64,
}

/// Reads a particle row as an empirical CDF.
///
/// Real line: `(x_i, i/N)` in stored order. Torus: positions are wrapped to
/// `[0, 1)` and re-sorted; the sorted j-th particle takes level `j/N`. The
/// stored order is a cyclic rotation of the wrapped order, so this rotates
/// the level assignment while preserving the `1/N` mass between circular
/// neighbors.
pub fn cdf_points(state: &ParticleState, time: f64) -> CdfPoints {
    let n = state.len();
    let level = |j: usize| (j + 1) as f64 / n as f64;
    let pairs = match state.domain() {
        Domain::RealLine => state
            .positions()
            .iter()
            .enumerate()
            .map(|(j, &x)| (x, level(j)))
            .collect(),
        Domain::Torus => {
            let mut wrapped: Vec<f64> =
                state.positions().iter().map(|&x| x.rem_euclid(1.0)).collect();
            wrapped.sort_by(|a, b| a.partial_cmp(b).unwrap());
            wrapped.into_iter().enumerate().map(|(j, x)| (x, level(j))).collect()
        }
    };
    CdfPoints { pairs, time }
}

/// Sup-norm distance between an empirical CDF and an exact distribution
/// `phi(x, t)`, evaluated at the particle positions.
pub fn cdf_sup_error(points: &CdfPoints, phi: impl Fn(f64, f64) -> f64) -> f64 {
    points
        .pairs
        .iter()
        .map(|&(x, q)| (phi(x, points.time) - q).abs())
        .fold(0.0, f64::max)
}
