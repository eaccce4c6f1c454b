#![no_main]

use cantorset::KString;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &str| {
    if let Ok(word) = data.parse::<KString>() {
        assert_eq!(word.symbols().len(), word.len());
        let text = word.to_string();
        let again: KString = text.parse().expect("canonical form reparses");
        assert_eq!(again, word);
    }
});
