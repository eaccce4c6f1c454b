#![no_main]

use cantorset::sampler::{subset_to_integers, SubsetWitness};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(witness) = SubsetWitness::from_json_str(data) {
        let text = witness.to_json_string();
        let again = SubsetWitness::from_json_str(&text).expect("canonical form reparses");
        assert_eq!(again.to_json_string(), text);
        // the integer view is sorted and duplicate-free
        let integers = subset_to_integers(&witness);
        assert!(integers.windows(2).all(|w| w[0] < w[1]));
        // rebuilding at the deepest length must not panic; it may fail
        // when the strings are not prefix-comparable
        if let Some(deepest) = witness.strings().last() {
            let _ = cantorset::sampler::reconstruct_prefix(
                &witness,
                deepest.len() * witness.k() as usize,
            );
        }
    }
});
