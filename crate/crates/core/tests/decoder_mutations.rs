//! Replays the fuzz corpus seeds, plus deterministic byte mutations of each,
//! through every decoder. Nothing may panic, and accepted inputs must
//! survive a round trip.

use std::fs;
use std::path::PathBuf;

use ideophone::lexicon::parse_lexicon_str;
use ideophone::{DetectionSet, EmbeddingTable, IdeophoneIndex, RasterImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

const MUTATIONS: usize = 400;

fn seeds(target: &str) -> Vec<Vec<u8>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    assert!(!paths.is_empty(), "no seeds in {}", dir.display());
    paths.into_iter().map(|p| fs::read(p).unwrap()).collect()
}

fn mutate(data: &[u8], rng: &mut ChaCha8Rng) -> Vec<u8> {
    let mut out = data.to_vec();
    for _ in 0..rng.gen_range(1..6) {
        match rng.gen_range(0..4) {
            0 if !out.is_empty() => {
                let i = rng.gen_range(0..out.len());
                out[i] ^= 1 << rng.gen_range(0..8);
            }
            1 if !out.is_empty() => {
                let i = rng.gen_range(0..out.len());
                out[i] = rng.gen();
            }
            2 => {
                let i = rng.gen_range(0..=out.len());
                out.insert(i, rng.gen());
            }
            _ if !out.is_empty() => {
                let i = rng.gen_range(0..out.len());
                let j = rng.gen_range(i..=out.len().min(i + 16));
                out.drain(i..j);
            }
            _ => {}
        }
    }
    out
}

fn each_input(target: &str, mut f: impl FnMut(&[u8])) {
    let mut rng = ChaCha8Rng::seed_from_u64(target.len() as u64);
    for seed in seeds(target) {
        f(&seed);
        for _ in 0..MUTATIONS {
            f(&mutate(&seed, &mut rng));
        }
    }
}

#[test]
fn embedding_table() {
    each_input("embedding_table", |data| {
        if let Ok(t) = EmbeddingTable::from_reader(data, "m") {
            assert!(t.dimension() > 0 && !t.is_empty());
        }
    });
}

#[test]
fn lexicon() {
    each_input("lexicon", |data| {
        if let Ok(text) = std::str::from_utf8(data) {
            if let Ok(entries) = parse_lexicon_str(text) {
                entries
                    .iter()
                    .for_each(|e| assert!(!e.display_form().is_empty()));
            }
        }
    });
}

#[test]
fn index_bytes() {
    each_input("index_bytes", |data| {
        if let Ok(index) = IdeophoneIndex::from_bytes(data) {
            assert_eq!(index.to_bytes(), data);
        }
    });
}

#[test]
fn index_body_with_valid_checksum() {
    let mut accepted = 0;
    each_input("index_body", |body| {
        let mut data = body.to_vec();
        data.extend_from_slice(&Sha256::digest(body));
        if let Ok(index) = IdeophoneIndex::from_bytes(&data) {
            assert_eq!(index.to_bytes(), data);
            accepted += 1;
        }
    });
    assert!(accepted > 0);
}

#[test]
fn detections() {
    each_input("detections", |data| {
        if let Ok(text) = std::str::from_utf8(data) {
            if let Ok(set) = DetectionSet::from_json(text) {
                assert_eq!(DetectionSet::from_json(&set.to_json()).unwrap(), set);
            }
        }
    });
}

#[test]
fn image_decode() {
    each_input("image_decode", |data| {
        if let Ok(img) = RasterImage::decode(data) {
            assert_eq!(
                img.pixels().len(),
                (img.width() * img.height() * 4) as usize
            );
        }
    });
}
