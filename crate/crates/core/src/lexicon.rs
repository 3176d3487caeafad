//! Ideophone dictionary ingest and the definition-vector index.
//!
//! The ingest format is JSON Lines: one object per line carrying `id`,
//! `forms`, `romaji`, `english` and `explanation`. The index file is a
//! little-endian binary container:
//!
//! ```text
//! "IDEOIDX" | u32 version | str source_id | u32 dimension | u8 gloss_mix
//! u32 n_entries | n_entries × entry | u32 n_excluded | n_excluded × (str id, str reason)
//! [u8; 32] SHA-256 of everything above
//! ```
//!
//! where `str` is a u32 byte length followed by UTF-8 and an entry is
//! `str id | u32 n, n × str form | str romaji | u32 n, n × str english |
//! str explanation | dimension × f64`.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::embedding::{mean_vector, tokenize, EmbeddingTable, SemanticVector};

pub const INDEX_MAGIC: &[u8; 7] = b"IDEOIDX";
pub const INDEX_VERSION: u32 = 1;
pub const NO_VOCAB_REASON: &str = "no in-vocabulary tokens";

const CHECKSUM_LEN: usize = 32;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon record {index} (line {line}): {message}")]
    Record {
        index: usize,
        line: usize,
        message: String,
    },
    #[error("duplicate ideophone id {0:?}")]
    DuplicateId(String),
    #[error("index format version {found} is not supported (expected {expected}); rebuild index")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("index file is corrupt: {0}")]
    Corrupt(String),
    #[error(
        "index was built from embedding {index}, but embedding {table} is loaded; rebuild index"
    )]
    StaleIndex { index: String, table: String },
}

/// One dictionary entry. Surface forms are kept verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdeophoneEntry {
    pub id: String,
    pub forms: Vec<String>,
    #[serde(default)]
    pub romaji: String,
    #[serde(rename = "english", default)]
    pub english_equivalents: Vec<String>,
    pub explanation: String,
}

impl IdeophoneEntry {
    fn validate(&self) -> Result<(), String> {
        if self.id.is_empty() {
            return Err("id is empty".into());
        }
        if self.forms.is_empty() {
            return Err("at least one form is required".into());
        }
        if self.forms.iter().any(|f| f.trim().is_empty()) {
            return Err("forms must be nonempty strings".into());
        }
        if self.explanation.trim().is_empty() {
            return Err("explanation is empty".into());
        }
        Ok(())
    }

    /// The surface string used for rendering.
    pub fn display_form(&self) -> &str {
        &self.forms[0]
    }

    fn definition_tokens(&self, gloss_mix: bool) -> Vec<String> {
        let mut tokens = tokenize(&self.explanation);
        if gloss_mix {
            for gloss in &self.english_equivalents {
                tokens.extend(tokenize(gloss));
            }
        }
        tokens
    }
}

pub fn parse_lexicon(path: impl AsRef<Path>) -> Result<Vec<IdeophoneEntry>, LexiconError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| LexiconError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_lexicon_str(&text)
}

/// Parses JSON Lines lexicon text. Blank lines are skipped; records are
/// numbered from zero in file order.
pub fn parse_lexicon_str(text: &str) -> Result<Vec<IdeophoneEntry>, LexiconError> {
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for (line_idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let index = entries.len();
        let record_err = |message: String| LexiconError::Record {
            index,
            line: line_idx + 1,
            message,
        };
        let entry: IdeophoneEntry =
            serde_json::from_str(line).map_err(|e| record_err(e.to_string()))?;
        entry.validate().map_err(record_err)?;
        if !seen.insert(entry.id.clone()) {
            return Err(LexiconError::DuplicateId(entry.id));
        }
        entries.push(entry);
    }
    Ok(entries)
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexedEntry {
    pub entry: IdeophoneEntry,
    pub vector: SemanticVector,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Exclusion {
    pub id: String,
    pub reason: String,
}

/// Lexicon entries paired with their definition vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct IdeophoneIndex {
    entries: Vec<IndexedEntry>,
    dimension: usize,
    embedding_source_id: String,
    gloss_mix: bool,
    excluded: Vec<Exclusion>,
}

/// Vectorizes each entry's explanation (plus its English glosses when
/// `gloss_mix` is set). Entries with no in-vocabulary token are excluded.
pub fn build_index(
    entries: &[IdeophoneEntry],
    table: &EmbeddingTable,
    gloss_mix: bool,
) -> Result<IdeophoneIndex, LexiconError> {
    let mut seen = HashSet::new();
    let mut indexed = Vec::with_capacity(entries.len());
    let mut excluded = Vec::new();
    for entry in entries {
        if !seen.insert(entry.id.as_str()) {
            return Err(LexiconError::DuplicateId(entry.id.clone()));
        }
        let vector = mean_vector(&entry.definition_tokens(gloss_mix), table);
        if vector.is_degenerate() {
            excluded.push(Exclusion {
                id: entry.id.clone(),
                reason: NO_VOCAB_REASON.to_string(),
            });
        } else {
            indexed.push(IndexedEntry {
                entry: entry.clone(),
                vector,
            });
        }
    }
    Ok(IdeophoneIndex {
        entries: indexed,
        dimension: table.dimension(),
        embedding_source_id: table.source_id().to_string(),
        gloss_mix,
        excluded,
    })
}

impl IdeophoneIndex {
    pub fn entries(&self) -> &[IndexedEntry] {
        &self.entries
    }

    pub fn excluded(&self) -> &[Exclusion] {
        &self.excluded
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn embedding_source_id(&self) -> &str {
        &self.embedding_source_id
    }

    pub fn gloss_mix(&self) -> bool {
        self.gloss_mix
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&IndexedEntry> {
        self.entries.iter().find(|e| e.entry.id == id)
    }

    /// Fails when the index was built against a different embedding file.
    pub fn check_embedding(&self, table: &EmbeddingTable) -> Result<(), LexiconError> {
        if self.embedding_source_id != table.source_id() || self.dimension != table.dimension() {
            return Err(LexiconError::StaleIndex {
                index: self.embedding_source_id.clone(),
                table: table.source_id().to_string(),
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(INDEX_MAGIC);
        out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
        put_str(&mut out, &self.embedding_source_id);
        put_u32(&mut out, self.dimension);
        out.push(self.gloss_mix as u8);
        put_u32(&mut out, self.entries.len());
        for IndexedEntry { entry, vector } in &self.entries {
            put_str(&mut out, &entry.id);
            put_strs(&mut out, &entry.forms);
            put_str(&mut out, &entry.romaji);
            put_strs(&mut out, &entry.english_equivalents);
            put_str(&mut out, &entry.explanation);
            for c in vector.components() {
                out.extend_from_slice(&c.to_bits().to_le_bytes());
            }
        }
        put_u32(&mut out, self.excluded.len());
        for ex in &self.excluded {
            put_str(&mut out, &ex.id);
            put_str(&mut out, &ex.reason);
        }
        let digest = Sha256::digest(&out);
        out.extend_from_slice(&digest);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, LexiconError> {
        let corrupt = |m: &str| LexiconError::Corrupt(m.to_string());
        let header = INDEX_MAGIC.len() + 4;
        if bytes.len() < header || &bytes[..INDEX_MAGIC.len()] != INDEX_MAGIC {
            return Err(corrupt("missing IDEOIDX magic"));
        }
        let version = u32::from_le_bytes(bytes[INDEX_MAGIC.len()..header].try_into().unwrap());
        if version != INDEX_VERSION {
            return Err(LexiconError::VersionMismatch {
                found: version,
                expected: INDEX_VERSION,
            });
        }
        if bytes.len() < header + CHECKSUM_LEN {
            return Err(corrupt("truncated file"));
        }
        let (body, checksum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
        if Sha256::digest(body).as_slice() != checksum {
            return Err(corrupt("checksum mismatch"));
        }

        let mut r = Cursor {
            buf: body,
            pos: header,
        };
        let embedding_source_id = r.string()?;
        let dimension = r.u32()? as usize;
        if dimension == 0 {
            return Err(corrupt("zero dimension"));
        }
        let gloss_mix = match r.u8()? {
            0 => false,
            1 => true,
            _ => return Err(corrupt("invalid gloss flag")),
        };
        let count = r.count(20 + dimension.saturating_mul(8))?;
        let mut ids = HashSet::new();
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let entry = IdeophoneEntry {
                id: r.string()?,
                forms: r.strings()?,
                romaji: r.string()?,
                english_equivalents: r.strings()?,
                explanation: r.string()?,
            };
            entry
                .validate()
                .map_err(|m| LexiconError::Corrupt(format!("entry {:?}: {m}", entry.id)))?;
            if !ids.insert(entry.id.clone()) {
                return Err(LexiconError::Corrupt(format!(
                    "duplicate id {:?}",
                    entry.id
                )));
            }
            let raw = r.take(
                dimension
                    .checked_mul(8)
                    .ok_or_else(|| corrupt("dimension overflow"))?,
            )?;
            let components: Vec<f64> = raw
                .chunks_exact(8)
                .map(|c| f64::from_bits(u64::from_le_bytes(c.try_into().unwrap())))
                .collect();
            let vector = SemanticVector::new(components)
                .map_err(|e| LexiconError::Corrupt(format!("entry {:?}: {e}", entry.id)))?;
            if vector.is_degenerate() {
                return Err(LexiconError::Corrupt(format!(
                    "entry {:?} has a zero vector",
                    entry.id
                )));
            }
            entries.push(IndexedEntry { entry, vector });
        }
        let n_excluded = r.count(8)?;
        let mut excluded = Vec::with_capacity(n_excluded);
        for _ in 0..n_excluded {
            let id = r.string()?;
            if !ids.insert(id.clone()) {
                return Err(LexiconError::Corrupt(format!("duplicate id {id:?}")));
            }
            excluded.push(Exclusion {
                id,
                reason: r.string()?,
            });
        }
        if r.pos != body.len() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(IdeophoneIndex {
            entries,
            dimension,
            embedding_source_id,
            gloss_mix,
            excluded,
        })
    }
}

pub fn save_index(index: &IdeophoneIndex, path: impl AsRef<Path>) -> Result<(), LexiconError> {
    let path = path.as_ref();
    fs::write(path, index.to_bytes()).map_err(|source| LexiconError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_index(path: impl AsRef<Path>) -> Result<IdeophoneIndex, LexiconError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| LexiconError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    IdeophoneIndex::from_bytes(&bytes)
}

fn put_u32(out: &mut Vec<u8>, n: usize) {
    let n = u32::try_from(n).expect("index field exceeds u32 range");
    out.extend_from_slice(&n.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

fn put_strs(out: &mut Vec<u8>, items: &[String]) {
    put_u32(out, items.len());
    for s in items {
        put_str(out, s);
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], LexiconError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&end| end <= self.buf.len())
            .ok_or_else(|| LexiconError::Corrupt("unexpected end of data".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, LexiconError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, LexiconError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    /// Reads an element count, rejecting counts that could not fit in the
    /// remaining bytes given a minimum element size.
    fn count(&mut self, min_elem: usize) -> Result<usize, LexiconError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(min_elem) > self.buf.len() - self.pos {
            return Err(LexiconError::Corrupt(format!("count {n} exceeds data")));
        }
        Ok(n)
    }

    fn string(&mut self) -> Result<String, LexiconError> {
        let n = self.u32()? as usize;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| LexiconError::Corrupt("invalid UTF-8".into()))
    }

    fn strings(&mut self) -> Result<Vec<String>, LexiconError> {
        let n = self.count(4)?;
        (0..n).map(|_| self.string()).collect()
    }
}
