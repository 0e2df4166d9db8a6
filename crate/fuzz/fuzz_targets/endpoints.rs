//! Endpoint files against chain specs of depth 1 to 3, picked by the first byte.

#![no_main]

use hypokinetic::geometry::SystemSpec;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&k, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    let spec = SystemSpec::chain(usize::from(k % 3) + 1, 1, 1.0, 1.0).expect("chain spec");
    let _ = hypokinetic::io::parse_endpoints(text, &spec);
});
