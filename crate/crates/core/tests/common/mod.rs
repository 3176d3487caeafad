#![allow(dead_code)]

use std::path::PathBuf;

use ideophone::EmbeddingTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn font_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/blocks.ttf")
}

pub fn word(i: usize) -> String {
    format!("w{}", to_letters(i))
}

fn to_letters(mut i: usize) -> String {
    let mut s = String::new();
    loop {
        s.push((b'a' + (i % 26) as u8) as char);
        i /= 26;
        if i == 0 {
            return s;
        }
    }
}

/// A random vocabulary of `n` words. Components are drawn away from zero so
/// no word vector is degenerate.
pub fn random_vocab(n: usize, dim: usize, seed: u64) -> Vec<(String, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let v = (0..dim)
                .map(|_| {
                    let x: f64 = rng.gen_range(0.05..1.0);
                    if rng.gen_bool(0.5) {
                        x
                    } else {
                        -x
                    }
                })
                .collect();
            (word(i), v)
        })
        .collect()
}

pub fn table(vocab: &[(String, Vec<f64>)]) -> EmbeddingTable {
    EmbeddingTable::from_vectors("test", vocab.iter().map(|(w, v)| (w.as_str(), v.clone())))
        .unwrap()
}

pub fn lookup<'a>(vocab: &'a [(String, Vec<f64>)], token: &str) -> Option<&'a [f64]> {
    vocab
        .iter()
        .find(|(w, _)| w == token)
        .map(|(_, v)| v.as_slice())
}

/// Plain mean over in-vocabulary tokens, `None` when there are none.
pub fn oracle_mean(vocab: &[(String, Vec<f64>)], tokens: &[String]) -> Option<Vec<f64>> {
    let hits: Vec<&[f64]> = tokens.iter().filter_map(|t| lookup(vocab, t)).collect();
    if hits.is_empty() {
        return None;
    }
    let dim = hits[0].len();
    let mut out = vec![0.0; dim];
    for (i, o) in out.iter_mut().enumerate() {
        *o = hits.iter().map(|v| v[i]).sum::<f64>() / hits.len() as f64;
    }
    Some(out)
}

pub fn oracle_weighted(
    vocab: &[(String, Vec<f64>)],
    dim: usize,
    items: &[(Vec<String>, f64)],
) -> Vec<f64> {
    let means: Vec<(Vec<f64>, f64)> = items
        .iter()
        .filter_map(|(tokens, c)| oracle_mean(vocab, tokens).map(|m| (m, *c)))
        .collect();
    let mut out = vec![0.0; dim];
    if means.is_empty() {
        return out;
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o = means.iter().map(|(m, c)| c * m[i]).sum::<f64>() / means.len() as f64;
    }
    out
}

pub fn oracle_cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (1.0 - dot / (na * nb)).clamp(0.0, 2.0)
}

/// Full sort of `(id, vector)` pairs by distance then id.
pub fn oracle_rank(defs: &[(String, Vec<f64>)], query: &[f64]) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = defs
        .iter()
        .map(|(id, v)| (id.clone(), oracle_cosine(query, v)))
        .collect();
    out.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    out
}
