#![no_main]

use libfuzzer_sys::fuzz_target;
use photonloom::fock::ModeId;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(mode) = text.parse::<ModeId>() {
            // Display and parse must agree.
            let shown = mode.to_string();
            assert_eq!(shown.parse::<ModeId>(), Ok(mode));
        }
    }
});
