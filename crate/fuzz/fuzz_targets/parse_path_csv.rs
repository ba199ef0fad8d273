#![no_main]

use libfuzzer_sys::fuzz_target;
use randsig::paths::{read_path_csv, write_path_csv, PathCsvKind};

fuzz_target!(|data: &[u8]| {
    if let Ok(path) = read_path_csv(data) {
        // Anything accepted must survive a write/read cycle unchanged.
        let mut out = Vec::new();
        write_path_csv(&path, PathCsvKind::Control, &mut out).unwrap();
        assert_eq!(read_path_csv(out.as_slice()).unwrap(), path);
    }
});
