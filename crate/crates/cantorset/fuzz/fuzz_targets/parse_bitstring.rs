#![no_main]

use cantorset::BitString;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    // parsing must never panic, and accepted strings must round-trip
    if let Ok(bits) = data.parse::<BitString>() {
        assert_eq!(bits.bits().len(), bits.len());
        let text = bits.to_string();
        let again: BitString = text.parse().expect("canonical form reparses");
        assert_eq!(again, bits);
    }
});
