#![no_main]

use kslab_core::io::{decode_field, encode_field};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((field, t)) = decode_field(data) {
        assert_eq!(encode_field(&field, t), data);
    }
});
