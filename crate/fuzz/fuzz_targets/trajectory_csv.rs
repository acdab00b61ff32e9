#![no_main]

use libfuzzer_sys::fuzz_target;

use mfgp::Domain;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        for domain in [Domain::Torus, Domain::RealLine] {
            if let Ok(grid) = mfgp::parse_trajectory_csv(text, domain) {
                // Accepted trajectories must be internally consistent.
                let _ = grid.min_gap();
                let _ = grid.validate_feasible();
            }
        }
    }
});
