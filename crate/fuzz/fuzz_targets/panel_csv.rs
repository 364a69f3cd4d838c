#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(panel) = ftsbench_core::io::parse_panel_csv(text) {
            assert_eq!(panel.returns.cols(), panel.instruments.len());
        }
    }
});
