#![no_main]

use libfuzzer_sys::fuzz_target;
use xxz_sim::lattice::{couplings, Geometry};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(g) = Geometry::from_json(text) {
        // accepted geometries round-trip and yield finite couplings
        let again = Geometry::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(again.n_atoms(), g.n_atoms());
        if g.n_atoms() <= 64 {
            if let Ok(j) = couplings(&g, 1.0) {
                assert!(j.pairs().all(|(_, _, v)| v.is_finite()));
            }
        }
    }
});
