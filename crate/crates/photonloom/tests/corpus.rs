//! Replays the checked-in fuzz corpus through the parsers. Every seed must
//! be handled without a panic, and the well-formed seeds must parse.

use std::path::PathBuf;

use photonloom::config::parse_config;
use photonloom::fock::{HybridState, ModeId};

fn corpus_dir(target: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target)
}

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = corpus_dir(target);
    let mut out = Vec::new();
    for entry in std::fs::read_dir(&dir).unwrap_or_else(|e| panic!("{}: {e}", dir.display())) {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        out.push((name, std::fs::read(&path).unwrap()));
    }
    assert!(!out.is_empty(), "empty corpus for {target}");
    out.sort();
    out
}

#[test]
fn config_corpus_parses_without_panic() {
    for (name, bytes) in seeds("parse_config") {
        let text = String::from_utf8(bytes).expect("seeds are utf8");
        let result = parse_config(&text);
        match name.as_str() {
            "full.cfg" | "minimal.cfg" => {
                result.unwrap_or_else(|e| panic!("{name} should parse: {e}"));
            }
            "broken.cfg" => assert!(result.is_err(), "{name} should be rejected"),
            _ => {
                let _ = result;
            }
        }
    }
}

#[test]
fn snapshot_corpus_round_trips() {
    for (name, bytes) in seeds("parse_snapshot") {
        let text = String::from_utf8(bytes).expect("seeds are utf8");
        match HybridState::from_snapshot(&text) {
            Ok(state) => {
                let again = HybridState::from_snapshot(&state.to_snapshot())
                    .unwrap_or_else(|e| panic!("{name} round trip: {e}"));
                let overlap = state.inner_product(&again).unwrap();
                assert!((overlap.norm_sqr() - state.norm_sqr().powi(2)).abs() < 1e-12);
            }
            Err(_) => assert_eq!(name, "malformed.snap", "{name} should parse"),
        }
    }
}

#[test]
fn mode_id_corpus_is_display_stable() {
    for (name, bytes) in seeds("parse_mode_id") {
        let text = String::from_utf8(bytes).expect("seeds are utf8");
        match text.parse::<ModeId>() {
            Ok(mode) => assert_eq!(mode.to_string().parse::<ModeId>(), Ok(mode)),
            Err(_) => assert_eq!(name, "bad", "{name} should parse"),
        }
    }
}
