#![no_main]

use cantorset::{format_rational, parse_rational};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    // bound the input so pathological exponents cannot blow up bigint sizes
    if data.len() > 256 {
        return;
    }
    if let Ok(r) = parse_rational(data) {
        let text = format_rational(&r);
        let again = parse_rational(&text).expect("canonical form reparses");
        assert_eq!(again, r);
    }
});
