#![no_main]

use libfuzzer_sys::fuzz_target;
use randsig::container::{decode_reservoir, encode_reservoir};

fuzz_target!(|data: &[u8]| {
    if let Ok(r) = decode_reservoir(data) {
        assert_eq!(decode_reservoir(&encode_reservoir(&r)).unwrap(), r);
    }
});
