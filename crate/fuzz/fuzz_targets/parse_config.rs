#![no_main]

use cabl_core::config::{parse_config, render_config, train_config_from_map};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(map) = parse_config(text) {
        assert_eq!(parse_config(&render_config(&map)).expect("rendered config parses"), map);
        if let Ok(c) = train_config_from_map(&map) {
            let _ = c.validate();
        }
    }
});
