//! Word-vector table and the vector arithmetic built on it.
//!
//! Tables are read from the plain pretrained-vector text layout: one record
//! per line, a token followed by `D` space-separated decimal components.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("cannot read embedding file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("embedding parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("embedding file contains no vectors")]
    Empty,
    #[error("confidence {value} of item {index} is outside [0, 1]")]
    Confidence { index: usize, value: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("cosine distance is undefined for a zero vector")]
    Degenerate,
    #[error("invalid vector: {0}")]
    InvalidVector(String),
}

/// Non-fatal conditions noticed while loading a table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LoadWarning {
    DuplicateToken {
        token: String,
        line: usize,
        first_line: usize,
    },
}

/// Immutable token → vector map. Keys are stored lowercased, so lookups are
/// case-insensitive.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dimension: usize,
    slots: HashMap<String, usize>,
    data: Vec<f64>,
    source_id: String,
    warnings: Vec<LoadWarning>,
}

impl EmbeddingTable {
    /// Loads a table from a word-vector text file.
    ///
    /// The resulting `source_id` is the file name followed by a digest of
    /// the file contents, so two different files never share an id.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbeddingError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| EmbeddingError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let label = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        Self::from_reader(file, &label).map_err(|e| match e {
            EmbeddingError::Io { source, .. } => EmbeddingError::Io {
                path: path.to_path_buf(),
                source,
            },
            other => other,
        })
    }

    pub fn from_reader<R: Read>(reader: R, label: &str) -> Result<Self, EmbeddingError> {
        let mut reader = BufReader::with_capacity(1 << 16, DigestReader::new(reader));
        let mut dimension = 0usize;
        let mut slots: HashMap<String, usize> = HashMap::new();
        let mut first_seen: HashMap<usize, usize> = HashMap::new();
        let mut data = Vec::new();
        let mut warnings = Vec::new();
        let mut raw = Vec::new();
        let mut line_no = 0usize;

        loop {
            raw.clear();
            let read = reader
                .read_until(b'\n', &mut raw)
                .map_err(|source| EmbeddingError::Io {
                    path: PathBuf::from(label),
                    source,
                })?;
            if read == 0 {
                break;
            }
            line_no += 1;
            let line = std::str::from_utf8(&raw).map_err(|_| EmbeddingError::Parse {
                line: line_no,
                message: "line is not valid UTF-8".into(),
            })?;
            let line = line.trim_end_matches(['\n', '\r']);
            if line.trim().is_empty() {
                continue;
            }

            let mut fields = line.split_ascii_whitespace();
            let token = match fields.next() {
                Some(t) => t.to_lowercase(),
                None => continue,
            };
            let start = data.len();
            for field in fields {
                let value: f64 = field.parse().map_err(|_| EmbeddingError::Parse {
                    line: line_no,
                    message: format!("component {field:?} is not a number"),
                })?;
                if !value.is_finite() {
                    return Err(EmbeddingError::Parse {
                        line: line_no,
                        message: format!("component {field:?} is not finite"),
                    });
                }
                data.push(value);
            }
            let width = data.len() - start;
            if dimension == 0 {
                if width == 0 {
                    return Err(EmbeddingError::Parse {
                        line: line_no,
                        message: format!("token {token:?} has no components"),
                    });
                }
                dimension = width;
            } else if width != dimension {
                return Err(EmbeddingError::Parse {
                    line: line_no,
                    message: format!("expected {dimension} components, found {width}"),
                });
            }

            let slot = start / dimension;
            if let Some(&existing) = slots.get(&token) {
                data.truncate(start);
                let warning = LoadWarning::DuplicateToken {
                    token,
                    line: line_no,
                    first_line: first_seen[&existing],
                };
                log::warn!("{label}: {warning:?}; keeping first occurrence");
                warnings.push(warning);
                continue;
            }
            first_seen.insert(slot, line_no);
            slots.insert(token, slot);
        }

        if slots.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        let digest = reader.into_inner().finish();
        data.shrink_to_fit();
        Ok(EmbeddingTable {
            dimension,
            slots,
            data,
            source_id: format!("{label}#{}", &digest[..16]),
            warnings,
        })
    }

    /// Builds a table from in-memory vectors. Tokens are lowercased and the
    /// first occurrence of a token wins.
    pub fn from_vectors<I, S>(source_id: &str, vectors: I) -> Result<Self, EmbeddingError>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: AsRef<str>,
    {
        let mut dimension = 0;
        let mut slots = HashMap::new();
        let mut data = Vec::new();
        let mut warnings = Vec::new();
        for (i, (token, vector)) in vectors.into_iter().enumerate() {
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(EmbeddingError::InvalidVector(format!(
                    "non-finite component for token {:?}",
                    token.as_ref()
                )));
            }
            if dimension == 0 {
                if vector.is_empty() {
                    return Err(EmbeddingError::InvalidVector("empty vector".into()));
                }
                dimension = vector.len();
            } else if vector.len() != dimension {
                return Err(EmbeddingError::DimensionMismatch {
                    left: dimension,
                    right: vector.len(),
                });
            }
            let token = token.as_ref().to_lowercase();
            if slots.contains_key(&token) {
                warnings.push(LoadWarning::DuplicateToken {
                    token,
                    line: i + 1,
                    first_line: 0,
                });
                continue;
            }
            slots.insert(token, data.len() / dimension);
            data.extend_from_slice(&vector);
        }
        if slots.is_empty() {
            return Err(EmbeddingError::Empty);
        }
        Ok(EmbeddingTable {
            dimension,
            slots,
            data,
            source_id: source_id.to_string(),
            warnings,
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn source_id(&self) -> &str {
        &self.source_id
    }

    pub fn warnings(&self) -> &[LoadWarning] {
        &self.warnings
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        let slot = match self.slots.get(token) {
            Some(&slot) => slot,
            None => *self.slots.get(&token.to_lowercase())?,
        };
        let start = slot * self.dimension;
        Some(&self.data[start..start + self.dimension])
    }

    pub fn contains(&self, token: &str) -> bool {
        self.get(token).is_some()
    }
}

struct DigestReader<R> {
    inner: R,
    hasher: Sha256,
}

impl<R> DigestReader<R> {
    fn new(inner: R) -> Self {
        DigestReader {
            inner,
            hasher: Sha256::new(),
        }
    }

    fn finish(self) -> String {
        self.hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

impl<R: Read> Read for DigestReader<R> {
    fn read(&mut self, buf: &mut [u8]) -> std::io::Result<usize> {
        let n = self.inner.read(buf)?;
        self.hasher.update(&buf[..n]);
        Ok(n)
    }
}

/// A dense vector in embedding space. The all-zero vector stands for "no
/// information" and is reported by [`SemanticVector::is_degenerate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticVector(Vec<f64>);

impl SemanticVector {
    pub fn new(components: Vec<f64>) -> Result<Self, EmbeddingError> {
        if components.is_empty() {
            return Err(EmbeddingError::InvalidVector("empty vector".into()));
        }
        if components.iter().any(|c| !c.is_finite()) {
            return Err(EmbeddingError::InvalidVector("non-finite component".into()));
        }
        Ok(SemanticVector(components))
    }

    pub fn zeros(dimension: usize) -> Self {
        SemanticVector(vec![0.0; dimension])
    }

    pub fn components(&self) -> &[f64] {
        &self.0
    }

    pub fn into_components(self) -> Vec<f64> {
        self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.0.iter().all(|&c| c == 0.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

/// Lowercases `text` and splits it on every non-alphanumeric character.
/// Fragments made only of digits (sense markers such as `(1)`) are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|frag| !frag.is_empty() && !frag.chars().all(|c| c.is_numeric()))
        .map(str::to_string)
        .collect()
}

/// Mean of the vectors of the in-vocabulary tokens. Out-of-vocabulary tokens
/// count toward neither the sum nor the divisor; when none is known the
/// result is the degenerate zero vector.
pub fn mean_vector<S: AsRef<str>>(tokens: &[S], table: &EmbeddingTable) -> SemanticVector {
    let mut sum = vec![0.0; table.dimension()];
    let mut present = 0usize;
    for token in tokens {
        if let Some(v) = table.get(token.as_ref()) {
            for (acc, x) in sum.iter_mut().zip(v) {
                *acc += x;
            }
            present += 1;
        }
    }
    if present > 0 {
        let n = present as f64;
        sum.iter_mut().for_each(|x| *x /= n);
    }
    SemanticVector(sum)
}

/// One label with its detection confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedLabel {
    pub tokens: Vec<String>,
    pub confidence: f64,
}

impl WeightedLabel {
    pub fn new(tokens: Vec<String>, confidence: f64) -> Self {
        WeightedLabel { tokens, confidence }
    }
}

/// Confidence-weighted mean of label vectors: `Σ c_j · v_j / n`, where each
/// `v_j` is the token mean of label `j` and `n` counts only the labels with a
/// non-degenerate vector.
pub fn weighted_vector(
    items: &[WeightedLabel],
    table: &EmbeddingTable,
) -> Result<SemanticVector, EmbeddingError> {
    if let Some((index, item)) = items
        .iter()
        .enumerate()
        .find(|(_, it)| !(0.0..=1.0).contains(&it.confidence))
    {
        return Err(EmbeddingError::Confidence {
            index,
            value: item.confidence,
        });
    }
    let mut sum = vec![0.0; table.dimension()];
    let mut counted = 0usize;
    for item in items {
        let label = mean_vector(&item.tokens, table);
        if label.is_degenerate() {
            continue;
        }
        for (acc, x) in sum.iter_mut().zip(label.components()) {
            *acc += item.confidence * x;
        }
        counted += 1;
    }
    if counted > 0 {
        let n = counted as f64;
        sum.iter_mut().for_each(|x| *x /= n);
    }
    Ok(SemanticVector(sum))
}

/// `1 − cos(a, b)`, clamped to `[0, 2]`.
pub fn cosine_distance(a: &SemanticVector, b: &SemanticVector) -> Result<f64, EmbeddingError> {
    if a.dimension() != b.dimension() {
        return Err(EmbeddingError::DimensionMismatch {
            left: a.dimension(),
            right: b.dimension(),
        });
    }
    if a.is_degenerate() || b.is_degenerate() {
        return Err(EmbeddingError::Degenerate);
    }
    Ok(cosine_distance_unchecked(a.components(), b.components()))
}

pub(crate) fn cosine_distance_unchecked(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut aa, mut bb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        aa += x * x;
        bb += y * y;
    }
    // sqrt(aa * bb) keeps identical vectors at exactly zero distance.
    let mut denom = (aa * bb).sqrt();
    if !denom.is_normal() {
        denom = aa.sqrt() * bb.sqrt();
    }
    (1.0 - dot / denom).clamp(0.0, 2.0)
}
