#![no_main]

use cantorset::DyadicMeasure;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(mu) = DyadicMeasure::from_json_str(data) {
        // canonical serialization is a fixed point
        let text = mu.to_json_string();
        let again = DyadicMeasure::from_json_str(&text).expect("canonical form reparses");
        assert_eq!(again.to_json_string(), text);
        assert_eq!(again.depth(), mu.depth());
        assert_eq!(again.total_mass(), mu.total_mass());
    }
});
