#![no_main]
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(summary) = difftd_cli::experiment::read_aggregate_csv(text) {
            let _ = difftd_cli::plot::render_svg(&summary);
        }
    }
});
