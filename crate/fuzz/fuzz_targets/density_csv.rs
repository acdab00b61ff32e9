#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(density) = mfgp::TabulatedDensity::from_csv_str(text) {
            // A parsed table must support the operations the solver uses.
            let (lo, hi) = density.support();
            let _ = density.cdf(0.5 * (lo + hi));
            let _ = density.lp_integral(2.0);
        }
    }
});
