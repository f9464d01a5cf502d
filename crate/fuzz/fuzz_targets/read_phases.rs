#![no_main]

use cabl_core::report::{read_phases, write_phases};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = read_phases(data) {
        let mut out = Vec::new();
        write_phases(&rows, &mut out).expect("accepted phases can be written");
        assert_eq!(read_phases(out.as_slice()).expect("written phases read back"), rows);
    }
});
