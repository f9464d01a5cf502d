#![no_main]

use cabl_core::perception::load_dataset;
use libfuzzer_sys::fuzz_target;

// Input is the rows file and the sidecar file separated by a NUL byte.
fuzz_target!(|data: &[u8]| {
    let (rows, sidecar) = match data.iter().position(|&b| b == 0) {
        Some(i) => (&data[..i], &data[i + 1..]),
        None => (data, &[][..]),
    };
    let _ = load_dataset(rows, sidecar);
});
