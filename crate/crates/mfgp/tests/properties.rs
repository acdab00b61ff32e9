//! Randomized structural invariants of the discrete action: symmetries,
//! conservation identities, formatting and file round-trips, and the
//! quadrature fallback. These hold for every feasible grid, optimal or
//! not, so they are checked on freshly sampled data rather than on solver
//! output.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::random_feasible_grid;
use mfgp::{
    fmt_g17, gradient, load_trajectory_csv, objective, objective_scaled, parse_config,
    write_trajectory_csv, CouplingSpec, DensitySpec, Domain, HamiltonianSpec,
    PotentialSpec, ProblemSpec, TrajectoryGrid,
};

fn plain_spec(domain: Domain, n: usize, n_t: usize) -> ProblemSpec {
    ProblemSpec {
        domain,
        horizon: 1.0,
        n_particles: n,
        n_time_steps: n_t,
        hamiltonian: HamiltonianSpec::PowerLaw { exponent: 2.5 },
        coupling: CouplingSpec::QuadraticHalf,
        potential: PotentialSpec::Constant { value: 0.2 },
        initial_density: DensitySpec::Uniform { lo: 0.0, hi: 1.0 },
        terminal_density: DensitySpec::Uniform { lo: 0.0, hi: 1.0 },
    }
}

fn sampled_grid(seed: u64, domain: Domain, n: usize, n_t: usize) -> TrajectoryGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_feasible_grid(&mut rng, domain, n, n_t, 1.0 / n_t as f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    /// Every finite double survives the CSV number format bit-exactly.
    #[test]
    fn g17_formatting_round_trips_every_float(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        let text = fmt_g17(x);
        let back: f64 = text.parse().expect("formatted floats parse");
        prop_assert_eq!(
            back.to_bits(), x.to_bits(),
            "{} reprinted as {} which parses to {}", x, &text, back
        );
    }

    /// The action only sees gaps and velocities, so with a constant
    /// potential a rigid translation of the whole trajectory is invisible.
    #[test]
    fn rigid_translations_leave_the_action_unchanged(
        seed in 0u64..1_000_000,
        shift in -0.45f64..0.45,
    ) {
        let spec = plain_spec(Domain::Torus, 4, 3);
        let grid = sampled_grid(seed, Domain::Torus, 4, 3);
        let before = objective_scaled(&spec, &grid).unwrap();
        let shifted: Vec<f64> = (0..=grid.n_steps())
            .flat_map(|k| grid.row(k).iter().map(move |&x| x + shift).collect::<Vec<_>>())
            .collect();
        let moved = TrajectoryGrid::from_rows(
            shifted, 4, 3, grid.dt(), Domain::Torus,
        ).expect("translation preserves feasibility");
        let after = objective_scaled(&spec, &moved).unwrap();
        prop_assert!(
            (before - after).abs() <= 1e-11 * (1.0 + before.abs()),
            "action moved under translation by {}: {} -> {}",
            shift, before, after
        );
    }

    /// Discrete Noether identity behind momentum conservation: with a
    /// constant potential the interior-row sums of the gradient telescope
    /// into backward differences of the total momentum over `dt`, for any
    /// feasible grid whatsoever (the gap terms cancel pairwise).
    #[test]
    fn gradient_row_sums_are_momentum_differences(
        seed in 0u64..1_000_000,
        torus in any::<bool>(),
    ) {
        let domain = if torus { Domain::Torus } else { Domain::RealLine };
        let (n, n_t) = (5, 4);
        let spec = plain_spec(domain, n, n_t);
        let grid = sampled_grid(seed, domain, n, n_t);
        let grad = gradient(&spec, &grid).unwrap();
        let momentum = |k: usize| -> f64 {
            let (row, next) = (grid.row(k), grid.row(k + 1));
            (0..n)
                .map(|j| {
                    let v = (next[j] - row[j]) / grid.dt();
                    spec.hamiltonian.lagrangian_prime(v).unwrap()
                })
                .sum()
        };
        for k in 1..n_t {
            let row_sum: f64 = grad[(k - 1) * n..k * n].iter().sum();
            let expected = (momentum(k - 1) - momentum(k)) / grid.dt();
            prop_assert!(
                (row_sum - expected).abs() <= 1e-10 * (1.0 + expected.abs()),
                "row {}: gradient sums to {} but the momentum difference is {}",
                k, row_sum, expected
            );
        }
    }

    /// The per-particle normalization: the reported objective is the
    /// scaled action divided by the particle count.
    #[test]
    fn objective_scaling_is_the_particle_count(seed in 0u64..1_000_000) {
        let spec = plain_spec(Domain::Torus, 6, 3);
        let grid = sampled_grid(seed, Domain::Torus, 6, 3);
        let scaled = objective_scaled(&spec, &grid).unwrap();
        let plain = objective(&spec, &grid).unwrap();
        prop_assert!(
            (scaled - 6.0 * plain).abs() <= 1e-12 * (1.0 + scaled.abs()),
            "objective {} vs scaled {}", plain, scaled
        );
    }

    /// Adaptive quadrature reproduces every closed-form enthalpy over six
    /// decades of density ratios.
    #[test]
    fn enthalpy_quadrature_matches_closed_forms(
        log_r in -3.0f64..3.0,
        pick in 0usize..4,
    ) {
        let coupling = [
            CouplingSpec::Linear,
            CouplingSpec::QuadraticHalf,
            CouplingSpec::Power { exponent: 1.7, coefficient: 0.4 },
            CouplingSpec::Power { exponent: 0.6, coefficient: 1.3 },
        ][pick].clone();
        let r = 10f64.powf(log_r);
        let exact = coupling.enthalpy(r).unwrap();
        let numeric = coupling.enthalpy_quadrature(r).unwrap();
        prop_assert!(
            (numeric - exact).abs() <= 1e-6 * exact.abs(),
            "coupling {:?} at r = {}: quadrature {} vs closed form {}",
            coupling, r, numeric, exact
        );
    }
}

proptest! {
    // File-system backed cases are slower; keep the count explicit and low.
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Whole trajectories survive the CSV writer/parser pair bit-exactly.
    #[test]
    fn trajectory_files_round_trip(
        seed in 0u64..1_000_000,
        torus in any::<bool>(),
    ) {
        let domain = if torus { Domain::Torus } else { Domain::RealLine };
        let grid = sampled_grid(seed, domain, 4, 3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trajectory.csv");
        write_trajectory_csv(&path, &grid).unwrap();
        let back = load_trajectory_csv(&path, domain).unwrap();
        prop_assert_eq!(back.n_particles(), grid.n_particles());
        prop_assert_eq!(back.n_steps(), grid.n_steps());
        for k in 0..=grid.n_steps() {
            for (j, (&a, &b)) in grid.row(k).iter().zip(back.row(k)).enumerate() {
                prop_assert_eq!(
                    a.to_bits(), b.to_bits(),
                    "position ({}, {}) changed across the file round-trip: {} vs {}",
                    k, j, a, b
                );
            }
        }
    }

    /// Valid configurations survive a serialize/parse cycle untouched.
    #[test]
    fn configs_round_trip_through_json(
        n in 2usize..9,
        n_t in 2usize..9,
        seed in any::<u64>(),
        grad_tol in 1e-12f64..1e-4,
    ) {
        let mut config = common::constant_potential_config(n, n_t);
        config.seed = seed;
        config.solver.grad_tol = grad_tol;
        let text = serde_json::to_string_pretty(&config).unwrap();
        let parsed = parse_config(&text).unwrap();
        parsed.validate().unwrap();
        let reprinted = serde_json::to_string_pretty(&parsed).unwrap();
        prop_assert_eq!(
            serde_json::from_str::<serde_json::Value>(&text).unwrap(),
            serde_json::from_str::<serde_json::Value>(&reprinted).unwrap(),
            "config changed across a parse/serialize cycle"
        );
    }
}
