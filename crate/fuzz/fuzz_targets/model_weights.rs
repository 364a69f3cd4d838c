#![no_main]

use ftsbench_core::dgm::{decode_weights, encode_weights};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(net) = decode_weights(data) {
        assert_eq!(encode_weights(&net), data);
    }
});
