//! Replays the checked-in fuzz corpus through the same properties the fuzz
//! targets assert, so the seeds run on stable with `cargo test`.

use std::fs;
use std::path::PathBuf;

use cayley_gibbs::config::RunConfig;
use cayley_gibbs::geometry::{BallGeometry, Spacing};

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fuzz/corpus")
        .join(target);
    let mut seeds: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|entry| {
            let path = entry.unwrap().path();
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            (name, fs::read(&path).unwrap())
        })
        .collect();
    seeds.sort();
    assert!(!seeds.is_empty(), "no seeds in {}", dir.display());
    seeds
}

#[test]
fn config_toml_seeds() {
    let mut accepted = 0;
    for (name, data) in corpus("config_toml") {
        let Ok(text) = std::str::from_utf8(&data) else {
            continue;
        };
        if let Ok(config) = RunConfig::from_toml_str(text) {
            let _ = config.validate();
            let again = config.to_toml_string().unwrap();
            let back = RunConfig::from_toml_str(&again).unwrap();
            assert_eq!(back, config, "{name}");
            accepted += 1;
        }
    }
    assert!(accepted >= 3);
}

#[test]
fn vertex_path_seeds() {
    let mut accepted = 0;
    for (name, data) in corpus("vertex_path") {
        let Some((&depth, rest)) = data.split_first() else {
            continue;
        };
        let Ok(text) = std::str::from_utf8(rest) else {
            continue;
        };
        let Ok(g) = BallGeometry::new(2 + (depth as usize % 3), u32::from(depth % 8)) else {
            continue;
        };
        if let Ok(v) = g.parse_path(text) {
            assert_eq!(g.parse_path(&g.path_string(v)).unwrap(), v, "{name}");
            accepted += 1;
        }
    }
    assert!(accepted >= 2);
}

#[test]
fn spacing_seeds() {
    let mut accepted = 0;
    for (name, data) in corpus("spacing") {
        let Ok(text) = std::str::from_utf8(&data) else {
            continue;
        };
        if let Ok(spacing) = text.parse::<Spacing>() {
            let again: Spacing = spacing.to_string().parse().unwrap();
            assert_eq!(again, spacing, "{name}");
            accepted += 1;
        }
    }
    assert!(accepted >= 4);
}
