//! Replays the checked-in fuzz corpus through the properties the fuzz targets assert.

use std::fs;
use std::path::PathBuf;

use kslab_core::io::{
    decode_field, decode_positions, encode_field, encode_positions, parse_reports, reports_to_json, RunConfig,
};

fn corpus(target: &str) -> Vec<(PathBuf, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .map(|p| {
            let bytes = fs::read(&p).unwrap();
            (p, bytes)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "empty corpus for {target}");
    out
}

#[test]
fn config_seeds() {
    let mut accepted = 0;
    for (path, bytes) in corpus("config_parse") {
        let text = String::from_utf8(bytes).unwrap();
        if let Ok(config) = RunConfig::from_toml_str(&text) {
            let again = RunConfig::from_toml_str(&config.to_toml_string()).unwrap();
            assert_eq!(config.hash(), again.hash(), "{}", path.display());
            accepted += 1;
        }
    }
    assert!(accepted >= 2);
}

#[test]
fn field_seeds() {
    let mut accepted = 0;
    for (path, bytes) in corpus("field_snapshot_decode") {
        if let Ok((field, t)) = decode_field(&bytes) {
            assert_eq!(encode_field(&field, t), bytes, "{}", path.display());
            accepted += 1;
        }
    }
    assert!(accepted >= 3);
}

#[test]
fn positions_seeds() {
    let mut accepted = 0;
    for (path, bytes) in corpus("positions_decode") {
        if let Ok(snap) = decode_positions(&bytes) {
            assert_eq!(encode_positions(&snap.positions, snap.d, snap.t), bytes, "{}", path.display());
            accepted += 1;
        }
    }
    assert!(accepted >= 3);
}

#[test]
fn report_seeds() {
    for (path, bytes) in corpus("report_json_parse") {
        let reports =
            parse_reports(std::str::from_utf8(&bytes).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let again = parse_reports(&reports_to_json(&reports)).unwrap();
        assert_eq!(reports.len(), again.len());
    }
}
