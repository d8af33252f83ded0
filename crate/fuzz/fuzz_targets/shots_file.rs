#![no_main]

use libfuzzer_sys::fuzz_target;
use xxz_sim::measure::{parse_shots, write_shots};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(file) = parse_shots(text) {
        let again = parse_shots(&write_shots(
            &file.shots,
            file.n_atoms,
            file.seed,
            &file.spam,
        ))
        .unwrap();
        assert_eq!(again.shots, file.shots);
    }
});
