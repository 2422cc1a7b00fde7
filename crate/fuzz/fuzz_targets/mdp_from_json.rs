#![no_main]
use libfuzzer_sys::fuzz_target;

// Parsing an untrusted MDP specification file must never panic; invalid
// tables come back as errors.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = difftd::mdp::TabularMdp::from_json(text);
    }
});
