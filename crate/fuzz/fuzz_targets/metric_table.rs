#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(table) = ftsbench_core::evaluation::MetricTable::from_csv(text) {
            let again = ftsbench_core::evaluation::MetricTable::from_csv(&table.to_csv()).expect("round trip");
            assert_eq!(again.models, table.models);
        }
    }
});
