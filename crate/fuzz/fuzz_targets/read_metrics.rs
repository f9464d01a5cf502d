#![no_main]

use cabl_core::report::{read_metrics, write_metrics};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = read_metrics(data) {
        let mut out = Vec::new();
        write_metrics(&table, &mut out).expect("accepted metrics can be written");
        read_metrics(out.as_slice()).expect("written metrics read back");
    }
});
