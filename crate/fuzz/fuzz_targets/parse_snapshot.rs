#![no_main]

use libfuzzer_sys::fuzz_target;
use photonloom::fock::HybridState;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(state) = HybridState::from_snapshot(text) {
            // A successful parse must survive a round trip.
            let again = HybridState::from_snapshot(&state.to_snapshot())
                .expect("round trip of a parsed snapshot");
            assert_eq!(state.atom_count(), again.atom_count());
        }
    }
});
