#![no_main]
use libfuzzer_sys::fuzz_target;

// Aggregation runs on rows parsed from untrusted CSV; ragged or malformed
// grids must surface as errors, never panics.
fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(rows) = difftd_cli::experiment::read_raw_csv(text) {
            let _ = difftd_cli::experiment::aggregate_rows(&rows);
        }
    }
});
