//! Deterministic file output and the matching loaders.
//!
//! Every CSV number goes through [`fmt_g17`] (17 significant digits, C
//! `%.17g` semantics — enough to round-trip any finite `f64` exactly), every
//! line ends in a bare LF, iteration orders are fixed, and nothing
//! timestamped is ever written: identical inputs produce byte-identical
//! files. JSON documents serialize structs with a fixed field order for the
//! same reason.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::diagnostics::DiagnosticsReport;
use crate::discretization::{discrete_density, TrajectoryGrid};
use crate::error::{Error, Result};
use crate::exact::ReferenceSolution;
use crate::model::Domain;
use crate::quantile::CdfPoints;

/// Formats like C's `%.17g`: up to 17 significant digits, fixed notation
/// for decimal exponents in `[-4, 17)`, scientific otherwise, trailing
/// zeros removed, exponent written with a sign and at least two digits.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    if x.is_infinite() {
        return if x < 0.0 { "-inf" } else { "inf" }.to_string();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0" } else { "0" }.to_string();
    }
    // The exponent must come from the *rounded* 17-digit value, so format
    // scientifically first and read it back.
    let sci = format!("{x:.16e}");
    let (mantissa, exponent) = sci.split_once('e').expect("float format has exponent");
    let e10: i32 = exponent.parse().expect("float exponent parses");
    if (-4..17).contains(&e10) {
        let decimals = (16 - e10) as usize;
        let fixed = format!("{x:.decimals$}");
        if fixed.contains('.') {
            fixed.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            fixed
        }
    } else {
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        let sign = if e10 < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", e10.abs())
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| io_err(path, e))
}

fn read_file(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, &text)
}

// ---------------------------------------------------------------------------
// Trajectory CSV
// ---------------------------------------------------------------------------

pub const TRAJECTORY_HEADER: &str = "n,t,i,x_wrapped,x_lifted,R_i";

/// Writes the full trajectory, one row per (time node, particle):
/// `n,t,i,x_wrapped,x_lifted,R_i` with `i` 1-based.
pub fn write_trajectory_csv(path: &Path, grid: &TrajectoryGrid) -> Result<()> {
    let mut out = String::new();
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for k in 0..=grid.n_steps() {
        let state = grid.state(k)?;
        let density = discrete_density(&state)?;
        let t = grid.time(k);
        for (j, &x) in grid.row(k).iter().enumerate() {
            let wrapped = grid.domain().wrap(x);
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                k,
                fmt_g17(t),
                j + 1,
                fmt_g17(wrapped),
                fmt_g17(x),
                fmt_g17(density.values()[j]),
            );
        }
    }
    write_file(path, &out)
}

/// Parses trajectory CSV text back into a grid (lifted coordinates are the
/// authority; the wrapped column is cross-checked). Shape is inferred from
/// the `n` and `i` columns, which must enumerate a full rectangle in order.
pub fn parse_trajectory_csv(text: &str, domain: Domain) -> Result<TrajectoryGrid> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == TRAJECTORY_HEADER => {}
        other => {
            return Err(Error::TabulatedData(format!(
                "trajectory CSV must start with '{TRAJECTORY_HEADER}' (got {other:?})"
            )));
        }
    }
    let mut rows: Vec<(usize, f64, usize, f64, f64)> = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::TabulatedData(format!(
                "trajectory CSV line {}: expected 6 columns, got {}",
                lineno + 2,
                fields.len()
            )));
        }
        let parse_int = |s: &str, what: &str| {
            s.trim().parse::<usize>().map_err(|_| {
                Error::TabulatedData(format!(
                    "trajectory CSV line {}: cannot parse {what} '{s}'",
                    lineno + 2
                ))
            })
        };
        let parse_num = |s: &str, what: &str| {
            s.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                Error::TabulatedData(format!(
                    "trajectory CSV line {}: cannot parse {what} '{s}'",
                    lineno + 2
                ))
            })
        };
        rows.push((
            parse_int(fields[0], "time index")?,
            parse_num(fields[1], "time")?,
            parse_int(fields[2], "particle index")?,
            parse_num(fields[3], "wrapped position")?,
            parse_num(fields[4], "lifted position")?,
        ));
        // The density column is derived data; it is rewritten on save and
        // deliberately not validated here.
    }
    if rows.is_empty() {
        return Err(Error::TabulatedData("trajectory CSV has no data rows".into()));
    }
    let n = rows.iter().take_while(|r| r.0 == 0).count();
    if n < 2 {
        return Err(Error::TabulatedData(format!(
            "trajectory CSV needs at least 2 particles per row (got {n})"
        )));
    }
    if !rows.len().is_multiple_of(n) {
        return Err(Error::TabulatedData(format!(
            "trajectory CSV has {} rows, not a multiple of N = {n}",
            rows.len()
        )));
    }
    let n_nodes = rows.len() / n;
    if n_nodes < 2 {
        return Err(Error::TabulatedData(
            "trajectory CSV needs at least 2 time nodes".into(),
        ));
    }
    let n_steps = n_nodes - 1;
    let final_t = rows[rows.len() - 1].1;
    if !(final_t > 0.0) {
        return Err(Error::TabulatedData(format!(
            "trajectory CSV final time must be positive (got {final_t})"
        )));
    }
    let dt = final_t / n_steps as f64;
    let mut positions = Vec::with_capacity(rows.len());
    for (idx, &(k, t, i, wrapped, lifted)) in rows.iter().enumerate() {
        let (want_k, want_i) = (idx / n, idx % n + 1);
        if k != want_k || i != want_i {
            return Err(Error::TabulatedData(format!(
                "trajectory CSV line {}: expected (n, i) = ({want_k}, {want_i}), \
                 got ({k}, {i})",
                idx + 2
            )));
        }
        if (t - want_k as f64 * dt).abs() > 1e-9 * (1.0 + final_t) {
            return Err(Error::TabulatedData(format!(
                "trajectory CSV line {}: time {t} inconsistent with uniform \
                 step {dt}",
                idx + 2
            )));
        }
        if (domain.wrap(lifted) - wrapped).abs() > 1e-9 {
            return Err(Error::TabulatedData(format!(
                "trajectory CSV line {}: wrapped column {wrapped} does not \
                 match lifted position {lifted}",
                idx + 2
            )));
        }
        positions.push(lifted);
    }
    TrajectoryGrid::from_rows(positions, n, n_steps, dt, domain)
}

/// [`parse_trajectory_csv`] from a file.
pub fn load_trajectory_csv(path: &Path, domain: Domain) -> Result<TrajectoryGrid> {
    parse_trajectory_csv(&read_file(path)?, domain)
}

// ---------------------------------------------------------------------------
// CDF CSV
// ---------------------------------------------------------------------------

/// Writes reconstructed CDF points at one time: `x,level[,exact_level]`.
pub fn write_cdf_csv(
    path: &Path,
    points: &CdfPoints,
    reference: Option<&ReferenceSolution>,
) -> Result<()> {
    let mut out = String::new();
    out.push_str(if reference.is_some() { "x,level,exact_level" } else { "x,level" });
    out.push('\n');
    for &(x, level) in &points.pairs {
        match reference {
            Some(sol) => {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    fmt_g17(x),
                    fmt_g17(level),
                    fmt_g17(sol.cdf(x, points.time))
                );
            }
            None => {
                let _ = writeln!(out, "{},{}", fmt_g17(x), fmt_g17(level));
            }
        }
    }
    write_file(path, &out)
}

// ---------------------------------------------------------------------------
// Diagnostics CSV
// ---------------------------------------------------------------------------

/// Writes every series in the report as `series,index,t,value` rows.
/// Step-indexed series carry the left-node time; node-indexed series the
/// node time.
pub fn write_diagnostics_csv(
    path: &Path,
    report: &DiagnosticsReport,
    dt: f64,
) -> Result<()> {
    let mut out = String::new();
    out.push_str("series,index,t,value\n");
    let mut emit = |name: &str, series: &[f64]| {
        for (k, v) in series.iter().enumerate() {
            let _ = writeln!(out, "{name},{k},{},{}", fmt_g17(k as f64 * dt), fmt_g17(*v));
        }
    };
    if let Some(m) = &report.momentum {
        emit("momentum", &m.series);
    }
    if let Some(e) = &report.energy {
        emit("energy", &e.series);
    }
    for d in &report.displacement {
        emit(&format!("displacement_{}", d.function.label()), &d.series);
    }
    for lp in &report.lp {
        emit(
            &format!("power_sum_p{}", fmt_g17(lp.log_convexity.exponent)),
            &lp.log_convexity.series,
        );
        emit(
            &format!("lp_norm_p{}", fmt_g17(lp.uniform_bound.exponent)),
            &lp.uniform_bound.norms,
        );
    }
    write_file(path, &out)
}

// ---------------------------------------------------------------------------
// Sweep CSV
// ---------------------------------------------------------------------------

/// One row of a parameter sweep. `runtime_seconds` is the only
/// intentionally non-deterministic output in the crate.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub axis: String,
    pub value: usize,
    pub converged: Option<bool>,
    pub objective: Option<f64>,
    pub final_grad_norm: Option<f64>,
    pub cdf_sup_error_mid: Option<f64>,
    pub energy_interior_drift: Option<f64>,
    pub runtime_seconds: f64,
    pub error: Option<String>,
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut out = String::new();
    out.push_str(
        "axis,value,converged,objective,final_grad_norm,cdf_sup_error_mid,\
         energy_interior_drift,runtime_seconds,error\n",
    );
    let opt = |v: &Option<f64>| v.map(fmt_g17).unwrap_or_default();
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.axis,
            row.value,
            row.converged.map(|c| c.to_string()).unwrap_or_default(),
            opt(&row.objective),
            opt(&row.final_grad_norm),
            opt(&row.cdf_sup_error_mid),
            opt(&row.energy_interior_drift),
            fmt_g17(row.runtime_seconds),
            row.error
                .as_deref()
                .map(sanitize_csv_field)
                .unwrap_or_default(),
        );
    }
    write_file(path, &out)
}

/// Keeps free-form text on one unquoted CSV cell.
fn sanitize_csv_field(text: &str) -> String {
    text.chars()
        .map(|c| match c {
            ',' | '\n' | '\r' | '"' => ';',
            c => c,
        })
        .collect()
}
