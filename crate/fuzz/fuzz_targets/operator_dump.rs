#![no_main]

use libfuzzer_sys::fuzz_target;
use xxz_sim::hamiltonian::OperatorMatrix;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    // a 14-atom dump is a legal 4 GB allocation; keep the fuzzer within memory
    let small = serde_json::from_str::<serde_json::Value>(text)
        .ok()
        .and_then(|v| v["n_atoms"].as_u64())
        .is_some_and(|n| n <= 8);
    if !small {
        return;
    }
    if let Ok(op) = OperatorMatrix::from_dump_json(text) {
        // the dump drops elements below 1e-15
        let again = OperatorMatrix::from_dump_json(&op.dump_json().unwrap()).unwrap();
        assert!(again.max_abs_diff(&op) <= 1e-15);
    }
});
