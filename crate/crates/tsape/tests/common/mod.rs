#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use tsape_core::rng::DetRng;

/// Two or more Gaussian blobs around constant levels `0, 1, ...`, written as
/// UCR tsv with labels `1..=C`.
pub fn write_blobs(dir: &Path, name: &str, classes: usize, per_class: usize, length: usize, seed: u64) -> PathBuf {
    let mut rng = DetRng::new(seed);
    let mut text = String::new();
    for i in 0..classes * per_class {
        let class = i % classes;
        write!(text, "{}", class + 1).unwrap();
        for _ in 0..length {
            write!(text, "\t{}", class as f64 + 0.3 * rng.standard_normal()).unwrap();
        }
        text.push('\n');
    }
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

pub fn write_config(dir: &Path, json: &serde_json::Value) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(json).unwrap()).unwrap();
    path
}

/// Data rows of an emitted csv (comment and header skipped).
pub fn data_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    let body: String = lines.map(|l| format!("{l}\n")).collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    rdr.records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}
