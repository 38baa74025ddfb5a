#![no_main]

use kslab_core::io::{decode_positions, encode_positions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(snap) = decode_positions(data) {
        assert_eq!(encode_positions(&snap.positions, snap.d, snap.t), data);
    }
});
