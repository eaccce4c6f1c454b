#![no_main]

use cantorset::SampledTree;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(tree) = SampledTree::from_json_str(data) {
        let text = tree.to_json_string();
        let again = SampledTree::from_json_str(&text).expect("canonical form reparses");
        assert_eq!(again.to_json_string(), text);
        // every accepted tree yields a well-formed frontier
        for branch in tree.frontier_binary() {
            assert!(tree.extract(&branch).is_ok());
        }
    }
});
