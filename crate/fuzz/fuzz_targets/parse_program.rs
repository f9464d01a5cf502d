#![no_main]

use cabl_core::logic::parse_program;
use cabl_core::partition::partition;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(kb) = parse_program(text) {
        // printed programs parse back to the same knowledge base
        let again = parse_program(&kb.to_source()).expect("printed program parses");
        assert_eq!(again, kb);
        if let Ok(c) = partition(&kb, None) {
            c.check(&kb, None).expect("curriculum invariants");
        }
    }
});
