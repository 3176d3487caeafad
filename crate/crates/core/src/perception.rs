//! Visual detections: the detection-file schema, expression normalization,
//! and an adapter that runs an external detector process.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::tokenize;

pub const IMAGE_PLACEHOLDER: &str = "{image}";
pub const DEFAULT_DETECTOR_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, Error)]
pub enum PerceptionError {
    #[error("cannot read detections {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed detection document: {0}")]
    Schema(String),
    #[error("detection {index}: confidence {value} is outside [0, 1]")]
    Confidence { index: usize, value: f64 },
    #[error("detection {index}: {message}")]
    Record { index: usize, message: String },
    #[error("expression score {0} is outside [0, 1]")]
    ExpressionScore(f64),
    #[error("nothing detected")]
    NothingDetected,
    #[error("detector command: {message}{}", fmt_stderr(.stderr))]
    Detector { message: String, stderr: String },
    #[error("detector output rejected: {source}{}", fmt_stderr(.stderr))]
    DetectorOutput {
        #[source]
        source: Box<PerceptionError>,
        stderr: String,
    },
}

fn fmt_stderr(stderr: &str) -> String {
    let trimmed = stderr.trim();
    if trimmed.is_empty() {
        String::new()
    } else {
        format!("; stderr: {trimmed}")
    }
}

/// Source classifier of a detection.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Classifier {
    Object,
    Food,
    Expression,
    Other(String),
}

impl Classifier {
    pub fn as_str(&self) -> &str {
        match self {
            Classifier::Object => "object",
            Classifier::Food => "food",
            Classifier::Expression => "expression",
            Classifier::Other(tag) => tag,
        }
    }

    pub fn from_tag(tag: &str) -> Self {
        match tag {
            "object" => Classifier::Object,
            "food" => Classifier::Food,
            "expression" => Classifier::Expression,
            other => Classifier::Other(other.to_string()),
        }
    }
}

// Ordered by tag string so that tie-breaks read the same as the tags.
impl Ord for Classifier {
    fn cmp(&self, other: &Self) -> Ordering {
        self.as_str().cmp(other.as_str())
    }
}

impl PartialOrd for Classifier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Classifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Classifier {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Classifier {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let tag = String::deserialize(d)?;
        if tag.is_empty() {
            return Err(serde::de::Error::custom("empty classifier tag"));
        }
        Ok(Classifier::from_tag(&tag))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub label: String,
    pub confidence: f64,
    pub classifier: Classifier,
}

impl Detection {
    pub fn tokens(&self) -> Vec<String> {
        tokenize(&self.label)
    }
}

/// Maps a raw smile score to a `smile` or `frown` detection. Scores at or
/// above 0.5 are a smile with confidence `s`; lower scores are a frown with
/// confidence `1 - s`.
pub fn normalize_expression(score: f64) -> Result<Detection, PerceptionError> {
    if !(0.0..=1.0).contains(&score) {
        return Err(PerceptionError::ExpressionScore(score));
    }
    let (label, confidence) = if score >= 0.5 {
        ("smile", score)
    } else {
        ("frown", 1.0 - score)
    };
    Ok(Detection {
        label: label.to_string(),
        confidence,
        classifier: Classifier::Expression,
    })
}

/// Detections for one photo grouped by classifier. Every group is nonempty.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionSet {
    photo_id: String,
    groups: BTreeMap<Classifier, Vec<Detection>>,
}

impl DetectionSet {
    pub fn new(
        photo_id: impl Into<String>,
        detections: Vec<Detection>,
    ) -> Result<Self, PerceptionError> {
        if detections.is_empty() {
            return Err(PerceptionError::NothingDetected);
        }
        let mut groups: BTreeMap<Classifier, Vec<Detection>> = BTreeMap::new();
        for (index, d) in detections.into_iter().enumerate() {
            validate_detection(index, &d)?;
            groups.entry(d.classifier.clone()).or_default().push(d);
        }
        Ok(DetectionSet {
            photo_id: photo_id.into(),
            groups,
        })
    }

    pub fn photo_id(&self) -> &str {
        &self.photo_id
    }

    pub fn groups(&self) -> &BTreeMap<Classifier, Vec<Detection>> {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Parses the detection schema. Raw `smile_raw` scores are normalized.
    pub fn from_json(text: &str) -> Result<Self, PerceptionError> {
        let doc: RawDocument =
            serde_json::from_str(text).map_err(|e| PerceptionError::Schema(e.to_string()))?;
        let mut detections = Vec::with_capacity(doc.detections.len());
        for (index, raw) in doc.detections.into_iter().enumerate() {
            detections.push(raw.into_detection(index)?);
        }
        DetectionSet::new(doc.photo_id, detections)
    }

    /// Serializes to the detection schema. Expression detections are
    /// written already normalized, as `label`/`confidence`.
    pub fn to_json(&self) -> String {
        let doc = RawDocument {
            photo_id: self.photo_id.clone(),
            detections: self
                .groups
                .values()
                .flatten()
                .map(|d| RawDetection {
                    classifier: d.classifier.clone(),
                    label: Some(d.label.clone()),
                    confidence: Some(d.confidence),
                    smile_raw: None,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("detection document serializes")
    }
}

fn validate_detection(index: usize, d: &Detection) -> Result<(), PerceptionError> {
    if !(0.0..=1.0).contains(&d.confidence) {
        return Err(PerceptionError::Confidence {
            index,
            value: d.confidence,
        });
    }
    if d.tokens().is_empty() {
        return Err(PerceptionError::Record {
            index,
            message: format!("label {:?} has no usable tokens", d.label),
        });
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct RawDocument {
    #[serde(default)]
    photo_id: String,
    detections: Vec<RawDetection>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetection {
    classifier: Classifier,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    confidence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    smile_raw: Option<f64>,
}

impl RawDetection {
    fn into_detection(self, index: usize) -> Result<Detection, PerceptionError> {
        let record = |message: &str| PerceptionError::Record {
            index,
            message: message.to_string(),
        };
        match (self.smile_raw, self.label, self.confidence) {
            (Some(score), None, None) => {
                if self.classifier != Classifier::Expression {
                    return Err(record(
                        "smile_raw is only valid for the expression classifier",
                    ));
                }
                normalize_expression(score).map_err(|_| PerceptionError::Confidence {
                    index,
                    value: score,
                })
            }
            (Some(_), _, _) => Err(record("smile_raw cannot be combined with label/confidence")),
            (None, Some(label), Some(confidence)) => Ok(Detection {
                label,
                confidence,
                classifier: self.classifier,
            }),
            (None, None, _) => Err(record("missing label")),
            (None, Some(_), None) => Err(record("missing confidence")),
        }
    }
}

/// Reads a detection file. A missing `photo_id` defaults to the file stem.
pub fn load_detections(path: impl AsRef<Path>) -> Result<DetectionSet, PerceptionError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| PerceptionError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut set = DetectionSet::from_json(&text)?;
    if set.photo_id.is_empty() {
        set.photo_id = file_stem(path);
    }
    Ok(set)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Runs `command_template` with `{image}` replaced by `image_path` and
/// parses the detection document it prints on standard output.
///
/// The template is split with POSIX shell quoting rules; no shell is
/// involved.
pub fn run_external_detector(
    command_template: &str,
    image_path: &Path,
    timeout: Duration,
) -> Result<DetectionSet, PerceptionError> {
    let fail = |message: String| PerceptionError::Detector {
        message,
        stderr: String::new(),
    };
    if !command_template.contains(IMAGE_PLACEHOLDER) {
        return Err(fail(format!(
            "template {command_template:?} has no {IMAGE_PLACEHOLDER} placeholder"
        )));
    }
    let argv = shlex::split(command_template)
        .filter(|argv| !argv.is_empty())
        .ok_or_else(|| fail(format!("cannot parse template {command_template:?}")))?;
    let image = image_path.to_string_lossy();
    let argv: Vec<String> = argv
        .iter()
        .map(|arg| arg.replace(IMAGE_PLACEHOLDER, &image))
        .collect();

    let mut child = Command::new(&argv[0])
        .args(&argv[1..])
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| fail(format!("cannot start {:?}: {e}", argv[0])))?;

    let stdout = drain(child.stdout.take());
    let stderr = drain(child.stderr.take());
    let deadline = Instant::now() + timeout;
    let status: Option<ExitStatus> = loop {
        match child.try_wait() {
            Ok(Some(status)) => break Some(status),
            Ok(None) if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                break None;
            }
            Ok(None) => thread::sleep(Duration::from_millis(5)),
            Err(e) => return Err(fail(format!("cannot wait for detector: {e}"))),
        }
    };
    // On timeout the reader threads are left detached: a grandchild may
    // still hold the pipes open.
    let Some(status) = status else {
        return Err(fail(format!(
            "timed out after {:.1} s",
            timeout.as_secs_f64()
        )));
    };
    let stdout = stdout.join().unwrap_or_default();
    let stderr = String::from_utf8_lossy(&stderr.join().unwrap_or_default()).into_owned();

    if !status.success() {
        return Err(PerceptionError::Detector {
            message: format!("exited with {status}"),
            stderr,
        });
    }
    let text = String::from_utf8(stdout).map_err(|_| PerceptionError::DetectorOutput {
        source: Box::new(PerceptionError::Schema("output is not UTF-8".into())),
        stderr: stderr.clone(),
    })?;
    let mut set = DetectionSet::from_json(&text).map_err(|e| PerceptionError::DetectorOutput {
        source: Box::new(e),
        stderr,
    })?;
    if set.photo_id.is_empty() {
        set.photo_id = file_stem(image_path);
    }
    Ok(set)
}

fn drain<R: Read + Send + 'static>(pipe: Option<R>) -> thread::JoinHandle<Vec<u8>> {
    thread::spawn(move || {
        let mut buf = Vec::new();
        if let Some(mut pipe) = pipe {
            let _ = pipe.read_to_end(&mut buf);
        }
        buf
    })
}
