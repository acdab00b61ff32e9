//! The JSON run configuration consumed by the command-line interface.
//!
//! A run file bundles a problem instance with solver knobs, the diagnostics
//! request, optional pairing with a closed-form reference, and output
//! settings. Unknown fields are rejected by name so typos surface as config
//! errors instead of silently falling back to defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsRequest;
use crate::error::{Error, Result};
use crate::exact::{reference, ReferenceId};
use crate::model::ProblemSpec;
use crate::optimizer::SolverConfig;
use crate::quantile::DensitySpec;

/// Everything one `solve`/`diagnose` run needs. `sweep` derives per-point
/// copies from one of these.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Format version; this crate reads version 1 only.
    pub schema_version: u32,
    pub problem: ProblemSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Omitted means the full default set, restricted to what the problem's
    /// domain supports.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<DiagnosticsRequest>,
    /// Closed-form solution to compare against. Requires the problem data
    /// and both boundary densities to match it exactly.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceId>,
    /// Times at which to write reconstructed CDF files; each is snapped to
    /// the nearest grid node. Empty means the midpoint `T/2`.
    #[serde(default)]
    pub cdf_times: Vec<f64>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Run-level seed; a nonzero `solver.seed` takes precedence.
    #[serde(default)]
    pub seed: u64,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("mfgp_out")
}

impl RunConfig {
    /// Validates every section and their mutual consistency.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != 1 {
            return Err(Error::config(format!(
                "schema_version must be 1 (got {})",
                self.schema_version
            )));
        }
        self.problem.validate()?;
        self.solver.validate()?;
        if let Some(diagnostics) = &self.diagnostics {
            diagnostics.validate(self.problem.domain)?;
        }
        for (k, &t) in self.cdf_times.iter().enumerate() {
            if !t.is_finite() || t < 0.0 || t > self.problem.horizon {
                return Err(Error::config(format!(
                    "cdf_times[{k}] must lie in [0, T] = [0, {}] (got {t})",
                    self.problem.horizon
                )));
            }
        }
        if let Some(id) = self.reference {
            self.validate_reference_pairing(id)?;
        }
        Ok(())
    }

    /// A reference comparison is only meaningful when the problem being
    /// solved *is* the reference problem: same domain, same data, and the
    /// boundary densities drawn from the same solution at times 0 and `T`.
    fn validate_reference_pairing(&self, id: ReferenceId) -> Result<()> {
        let sol = reference(id);
        if self.problem.domain != sol.domain {
            return Err(Error::config(format!(
                "reference {id} lives on {:?}, but problem.domain is {:?}",
                sol.domain, self.problem.domain
            )));
        }
        if self.problem.hamiltonian != sol.hamiltonian {
            return Err(Error::config(format!(
                "problem.hamiltonian does not match reference {id}"
            )));
        }
        if self.problem.coupling != sol.coupling {
            return Err(Error::config(format!(
                "problem.coupling does not match reference {id}"
            )));
        }
        if self.problem.potential != sol.potential {
            return Err(Error::config(format!(
                "problem.potential does not match reference {id}"
            )));
        }
        let check_boundary = |what: &str, density: &DensitySpec, want_time: f64| {
            match density {
                DensitySpec::Reference { id: got, time }
                    if *got == id && (time - want_time).abs() <= 1e-12 =>
                {
                    Ok(())
                }
                _ => Err(Error::config(format!(
                    "problem.{what} must be the reference {id} density at \
                     time {want_time} when reference comparison is on"
                ))),
            }
        };
        check_boundary("initial_density", &self.problem.initial_density, 0.0)?;
        check_boundary(
            "terminal_density",
            &self.problem.terminal_density,
            self.problem.horizon,
        )?;
        Ok(())
    }

    /// The diagnostics request to run: the configured one, or the default
    /// set restricted to the problem's domain.
    pub fn effective_diagnostics(&self) -> DiagnosticsRequest {
        self.diagnostics
            .clone()
            .unwrap_or_else(|| DiagnosticsRequest::default_for(self.problem.domain))
    }

    /// CDF output times after applying the default (`[T/2]` when empty).
    pub fn effective_cdf_times(&self) -> Vec<f64> {
        if self.cdf_times.is_empty() {
            vec![self.problem.horizon / 2.0]
        } else {
            self.cdf_times.clone()
        }
    }

    /// The seed actually used: `solver.seed` when nonzero, else the
    /// run-level `seed`.
    pub fn effective_seed(&self) -> u64 {
        if self.solver.seed != 0 {
            self.solver.seed
        } else {
            self.seed
        }
    }

    /// Re-anchors relative tabulated-density paths at `base` (the config
    /// file's directory), so runs do not depend on the process working
    /// directory.
    pub fn rebase_paths(&mut self, base: &Path) {
        for density in [
            &mut self.problem.initial_density,
            &mut self.problem.terminal_density,
        ] {
            if let DensitySpec::Tabulated { path: Some(p), .. } = density {
                let as_path = Path::new(p.as_str());
                if as_path.is_relative() {
                    *p = base.join(as_path).display().to_string();
                }
            }
        }
    }
}

/// Parses config text; errors carry serde's field-naming messages.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let config: RunConfig =
        serde_json::from_str(text).map_err(|e| Error::config(e.to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Loads, rebases, and validates a config file.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io { path: path.display().to_string(), source: e })?;
    let mut config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    if let Some(dir) = path.parent() {
        config.rebase_paths(dir);
    }
    config.validate()?;
    Ok(config)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::model::{CouplingSpec, Domain, HamiltonianSpec, PotentialSpec};

    /// Smallest well-formed problem; tests override what they exercise.
    pub fn minimal_problem() -> ProblemSpec {
        ProblemSpec {
            domain: Domain::Torus,
            horizon: 1.0,
            n_particles: 4,
            n_time_steps: 4,
            hamiltonian: HamiltonianSpec::Quadratic,
            coupling: CouplingSpec::Linear,
            potential: PotentialSpec::Constant { value: 0.0 },
            initial_density: DensitySpec::Uniform { lo: 0.0, hi: 1.0 },
            terminal_density: DensitySpec::Uniform { lo: 0.0, hi: 1.0 },
        }
    }

    pub fn minimal_config() -> RunConfig {
        RunConfig {
            schema_version: 1,
            problem: minimal_problem(),
            solver: SolverConfig::default(),
            diagnostics: None,
            reference: None,
            cdf_times: Vec::new(),
            output_dir: default_output_dir(),
            seed: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::{minimal_config, minimal_problem};
    use super::*;
    use crate::model::{CouplingSpec, Domain, PotentialSpec};

    fn reference_config(id: ReferenceId) -> RunConfig {
        let sol = reference(id);
        let mut config = minimal_config();
        config.problem = ProblemSpec {
            domain: sol.domain,
            hamiltonian: sol.hamiltonian.clone(),
            coupling: sol.coupling.clone(),
            potential: sol.potential.clone(),
            initial_density: DensitySpec::Reference { id, time: 0.0 },
            terminal_density: DensitySpec::Reference { id, time: 1.0 },
            ..minimal_problem()
        };
        config.reference = Some(id);
        config
    }

    #[test]
    fn minimal_json_parses_with_defaults() {
        let config = parse_config(
            r#"{
                "schema_version": 1,
                "problem": {
                    "domain": "torus",
                    "T": 1.0,
                    "N": 8,
                    "N_T": 4,
                    "hamiltonian": {"family": "quadratic"},
                    "coupling": {"family": "linear"},
                    "potential": {"family": "constant", "value": 0.0},
                    "initial_density": {"family": "uniform"},
                    "terminal_density": {"family": "uniform"}
                }
            }"#,
        )
        .unwrap();
        assert_eq!(config.solver, SolverConfig::default());
        assert_eq!(config.effective_diagnostics(), DiagnosticsRequest::default());
        assert_eq!(config.output_dir, PathBuf::from("mfgp_out"));
        assert_eq!(config.effective_cdf_times(), vec![0.5]);
        assert_eq!(config.effective_seed(), 0);
    }

    #[test]
    fn unknown_fields_are_named_in_the_error() {
        let cases = [
            (r#"{"schema_version": 1, "problms": {}}"#, "problms"),
            (
                r#"{
                    "schema_version": 1,
                    "problem": {
                        "domain": "torus", "T": 1.0, "N": 8, "N_T": 4,
                        "hamiltonian": {"family": "quadratic"},
                        "coupling": {"family": "linear"},
                        "potential": {"family": "constant", "value": 0.0},
                        "initial_density": {"family": "uniform"},
                        "terminal_density": {"family": "uniform"},
                        "n_partcles": 8
                    }
                }"#,
                "n_partcles",
            ),
            (
                r#"{
                    "schema_version": 1,
                    "solver": {"grad_tool": 1e-6},
                    "problem": {
                        "domain": "torus", "T": 1.0, "N": 8, "N_T": 4,
                        "hamiltonian": {"family": "quadratic"},
                        "coupling": {"family": "linear"},
                        "potential": {"family": "constant", "value": 0.0},
                        "initial_density": {"family": "uniform"},
                        "terminal_density": {"family": "uniform"}
                    }
                }"#,
                "grad_tool",
            ),
        ];
        for (text, field) in cases {
            let err = parse_config(text).unwrap_err().to_string();
            assert!(err.contains(field), "error should name '{field}': {err}");
        }
    }

    #[test]
    fn missing_required_field_is_named() {
        let err = parse_config(r#"{"schema_version": 1}"#).unwrap_err().to_string();
        assert!(err.contains("problem"), "got: {err}");
        let err = parse_config("{}").unwrap_err().to_string();
        assert!(err.contains("schema_version"), "got: {err}");
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let mut config = minimal_config();
        config.schema_version = 2;
        let err = config.validate().unwrap_err().to_string();
        assert!(err.contains("schema_version"), "got: {err}");
    }

    #[test]
    fn cdf_times_must_lie_in_the_horizon() {
        let mut config = minimal_config();
        config.cdf_times = vec![0.25, 1.5];
        let err = config.validate().unwrap_err().to_string();
        assert!(err.contains("cdf_times[1]"), "got: {err}");
    }

    #[test]
    fn seed_precedence_prefers_nonzero_solver_seed() {
        let mut config = minimal_config();
        config.seed = 7;
        assert_eq!(config.effective_seed(), 7);
        config.solver.seed = 11;
        assert_eq!(config.effective_seed(), 11);
    }

    #[test]
    fn reference_pairing_accepts_the_matching_instance() {
        for id in ReferenceId::ALL {
            reference_config(id).validate().unwrap();
        }
    }

    #[test]
    fn default_diagnostics_adapt_to_the_domain() {
        use crate::diagnostics::ConvexTestFunction;
        // Test2 lives on the real line; the defaulted request must not
        // include test functions with U(0) != 0 there.
        let config = reference_config(ReferenceId::Test2);
        let request = config.effective_diagnostics();
        assert!(
            !request.displacement.contains(&ConvexTestFunction::ExpNeg),
            "real-line default kept exp_neg: {:?}",
            request.displacement
        );
        assert!(!request.displacement.is_empty(), "some functions must survive");
        request.validate(config.problem.domain).unwrap();

        // But an explicit exp_neg request on the real line is an error.
        let mut explicit = config;
        explicit.diagnostics = Some(DiagnosticsRequest {
            displacement: vec![ConvexTestFunction::ExpNeg],
            ..DiagnosticsRequest::default()
        });
        let err = explicit.validate().unwrap_err().to_string();
        assert!(err.contains("exp_neg"), "got: {err}");
    }

    #[test]
    fn reference_pairing_rejects_mismatches() {
        // Wrong coupling.
        let mut config = reference_config(ReferenceId::Test2);
        config.problem.coupling = CouplingSpec::QuadraticHalf;
        assert!(config.validate().is_err(), "coupling mismatch must fail");

        // Wrong potential.
        let mut config = reference_config(ReferenceId::Test1);
        config.problem.potential = PotentialSpec::Constant { value: 0.0 };
        assert!(config.validate().is_err(), "potential mismatch must fail");

        // Boundary density from a different solution.
        let mut config = reference_config(ReferenceId::Test2);
        config.problem.initial_density =
            DensitySpec::Reference { id: ReferenceId::Test3, time: 0.0 };
        assert!(config.validate().is_err(), "wrong boundary id must fail");

        // Terminal density at the wrong time.
        let mut config = reference_config(ReferenceId::Test2);
        config.problem.terminal_density =
            DensitySpec::Reference { id: ReferenceId::Test2, time: 0.5 };
        assert!(config.validate().is_err(), "wrong boundary time must fail");

        // Wrong domain (and everything else consistent with it).
        let mut config = reference_config(ReferenceId::Test1);
        config.problem.domain = Domain::RealLine;
        assert!(config.validate().is_err(), "domain mismatch must fail");
    }

    #[test]
    fn rebase_paths_anchors_relative_tabulated_files() {
        let mut config = minimal_config();
        config.problem.initial_density = DensitySpec::Tabulated {
            path: Some("densities/initial.csv".into()),
            xs: Vec::new(),
            densities: Vec::new(),
        };
        config.problem.terminal_density = DensitySpec::Tabulated {
            path: Some("/abs/terminal.csv".into()),
            xs: Vec::new(),
            densities: Vec::new(),
        };
        config.rebase_paths(Path::new("/configs"));
        let got = match &config.problem.initial_density {
            DensitySpec::Tabulated { path: Some(p), .. } => p.clone(),
            other => panic!("unexpected density {other:?}"),
        };
        assert_eq!(got, "/configs/densities/initial.csv");
        let got = match &config.problem.terminal_density {
            DensitySpec::Tabulated { path: Some(p), .. } => p.clone(),
            other => panic!("unexpected density {other:?}"),
        };
        assert_eq!(got, "/abs/terminal.csv", "absolute paths stay put");
    }

    #[test]
    fn round_trips_through_json() {
        let config = reference_config(ReferenceId::Test1);
        let text = serde_json::to_string_pretty(&config).unwrap();
        let back = parse_config(&text).unwrap();
        assert_eq!(back.problem, config.problem);
        assert_eq!(back.solver, config.solver);
        assert_eq!(back.reference, config.reference);
    }
}
