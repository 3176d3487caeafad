//! Shared helpers for the CLI test targets: fixture paths, a command
//! runner, synthetic photos, and a brute-force retrieval oracle that shares
//! no code with the library.

#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ideophone::{OutputFormat, RasterImage};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn font() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/blocks.ttf")
}

pub fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ideophone"))
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

pub fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Mid-gray photo with a dark rectangle.
pub fn photo_with_blob(w: u32, h: u32, blob: (u32, u32, u32, u32)) -> RasterImage {
    let mut img = RasterImage::filled(w, h, [200, 196, 190, 255]);
    img.fill_rect(blob.0, blob.1, blob.2, blob.3, [30, 28, 40, 255]);
    img
}

pub fn write_png(img: &RasterImage, path: &Path) {
    img.save(path, OutputFormat::Png).unwrap();
}

pub fn write_detections(path: &Path, photo_id: &str, items: &[(&str, &str, f64)]) {
    let detections: Vec<serde_json::Value> = items
        .iter()
        .map(|(classifier, label, confidence)| {
            if *label == "smile_raw" {
                serde_json::json!({"classifier": classifier, "smile_raw": confidence})
            } else {
                serde_json::json!({"classifier": classifier, "label": label, "confidence": confidence})
            }
        })
        .collect();
    let doc = serde_json::json!({"photo_id": photo_id, "detections": detections});
    std::fs::write(path, doc.to_string()).unwrap();
}

/// Independent reading of the word-vector text format.
pub fn oracle_vectors(path: &Path) -> HashMap<String, Vec<f64>> {
    let mut map = HashMap::new();
    for line in std::fs::read_to_string(path).unwrap().lines() {
        let mut it = line.split(' ');
        let word = it.next().unwrap().to_lowercase();
        let v: Vec<f64> = it.map(|x| x.parse().unwrap()).collect();
        map.entry(word).or_insert(v);
    }
    map
}

pub fn oracle_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars().chain(std::iter::once(' ')) {
        if ch.is_alphanumeric() {
            cur.extend(ch.to_lowercase());
        } else if !cur.is_empty() {
            if !cur.chars().all(|c| c.is_numeric()) {
                out.push(cur.clone());
            }
            cur.clear();
        }
    }
    out
}

pub fn oracle_mean(tokens: &[String], vectors: &HashMap<String, Vec<f64>>) -> Option<Vec<f64>> {
    let known: Vec<&Vec<f64>> = tokens.iter().filter_map(|t| vectors.get(t)).collect();
    if known.is_empty() {
        return None;
    }
    let dim = known[0].len();
    Some(
        (0..dim)
            .map(|i| known.iter().map(|v| v[i]).sum::<f64>() / known.len() as f64)
            .collect(),
    )
}

pub fn oracle_cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - dot / (na * nb)
}

/// Definition vectors for the fixture lexicon, keyed by id.
pub fn oracle_definitions(
    lexicon: &Path,
    vectors: &HashMap<String, Vec<f64>>,
) -> Vec<(String, Vec<f64>)> {
    std::fs::read_to_string(lexicon)
        .unwrap()
        .lines()
        .filter_map(|line| {
            let rec: serde_json::Value = serde_json::from_str(line).unwrap();
            let tokens = oracle_tokens(rec["explanation"].as_str().unwrap());
            oracle_mean(&tokens, vectors).map(|v| (rec["id"].as_str().unwrap().to_string(), v))
        })
        .collect()
}

/// Ids ranked by ascending distance to `query` (ties by id).
pub fn oracle_rank(defs: &[(String, Vec<f64>)], query: &[f64]) -> Vec<(String, f64)> {
    let mut scored: Vec<(String, f64)> = defs
        .iter()
        .map(|(id, v)| (id.clone(), oracle_cosine_distance(query, v)))
        .collect();
    scored.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    scored
}
