#![no_main]

use cabl_core::logic::{parse_goal, parse_term};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(t) = parse_term(text) {
        assert_eq!(parse_term(&t.to_string()).expect("printed term parses"), t);
    }
    let _ = parse_goal(text);
});
