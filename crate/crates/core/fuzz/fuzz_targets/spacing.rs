#![no_main]

use cayley_gibbs::geometry::Spacing;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spacing) = text.parse::<Spacing>() {
        let again: Spacing = spacing.to_string().parse().expect("display form parses");
        assert_eq!(again, spacing);
    }
});
