#![no_main]

use cayley_gibbs::geometry::BallGeometry;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&depth, rest)) = data.split_first() else {
        return;
    };
    let Ok(text) = std::str::from_utf8(rest) else {
        return;
    };
    let Ok(g) = BallGeometry::new(2 + (depth as usize % 3), u32::from(depth % 8)) else {
        return;
    };
    if let Ok(v) = g.parse_path(text) {
        assert_eq!(g.parse_path(&g.path_string(v)).ok(), Some(v));
    }
});
