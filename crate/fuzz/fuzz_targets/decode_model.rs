#![no_main]

use libfuzzer_sys::fuzz_target;
use randsig::container::{decode_model, encode_model};

fuzz_target!(|data: &[u8]| {
    if let Ok(m) = decode_model(data) {
        assert_eq!(decode_model(&encode_model(&m)).unwrap(), m);
    }
});
