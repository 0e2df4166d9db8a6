//! System spec JSON: parsing never panics, and accepted specs survive a write/read round trip.

#![no_main]

use hypokinetic::io::{parse_spec, spec_to_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = parse_spec(text) {
        let again = parse_spec(&spec_to_json(&spec)).expect("written spec parses");
        assert_eq!(spec_to_json(&again), spec_to_json(&spec));
    }
});
