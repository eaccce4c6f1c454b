#![no_main]

use cantorset::ClopenSet;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(set) = ClopenSet::from_json_str(data) {
        // canonicalization is idempotent
        let text = set.to_json_string();
        let again = ClopenSet::from_json_str(&text).expect("canonical form reparses");
        assert_eq!(again.to_json_string(), text);
        // canonical cylinders form an antichain (checked on small sets to
        // keep the quadratic scan cheap)
        let cylinders = set.cylinders();
        if cylinders.len() <= 64 {
            for a in cylinders {
                for b in cylinders {
                    assert!(a == b || !a.is_prefix_of(b));
                }
            }
        }
    }
});
