//! JSONL embedding records and stratified train/test splitting.
//!
//! Each line is one object:
//!
//! ```json
//! {"id":"a1","label":0,"domain":"medical","embedding":[0.1,0.2]}
//! ```
//!
//! `label` is 0 for machine generated and 1 for human text. `domain` is an
//! optional dataset tag used for per-domain metrics.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::Label;
use crate::error::{Error, Result};

/// Embedding width of the reference sentence encoder.
pub const DEFAULT_DIMENSION: usize = 768;

/// Domain tag given to records that carry none.
pub const DEFAULT_DOMAIN: &str = "unspecified";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingRecord {
    pub id: String,
    pub label: Label,
    pub domain: String,
    pub embedding: Vec<f64>,
}

/// A record to classify; any label in the input is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub id: String,
    pub domain: String,
    pub embedding: Vec<f64>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    #[serde(default)]
    label: Option<i64>,
    #[serde(default)]
    domain: Option<String>,
    embedding: Vec<f64>,
}

struct Parsed {
    line: usize,
    raw: RawRecord,
}

fn read_raw(path: &Path) -> Result<Vec<Parsed>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    let mut ids = HashSet::new();
    let mut width: Option<(usize, usize)> = None;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let invalid = |message: String| Error::Validation {
            path: path.to_path_buf(),
            line: line_no,
            message,
        };
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            message: e.to_string(),
        })?;
        if raw.embedding.is_empty() {
            return Err(invalid("embedding is empty".into()));
        }
        if raw.embedding.iter().any(|v| !v.is_finite()) {
            return Err(invalid("embedding has a non-finite coordinate".into()));
        }
        match width {
            None => width = Some((raw.embedding.len(), line_no)),
            Some((w, first)) if w != raw.embedding.len() => {
                return Err(invalid(format!(
                    "dimension mismatch: embedding has length {}, line {first} has {w}",
                    raw.embedding.len()
                )));
            }
            Some(_) => {}
        }
        if !ids.insert(raw.id.clone()) {
            return Err(invalid(format!("duplicate id {:?}", raw.id)));
        }
        out.push(Parsed { line: line_no, raw });
    }
    Ok(out)
}

/// Loads labelled records; every line must carry a label of 0 or 1.
pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Vec<EmbeddingRecord>> {
    let path = path.as_ref();
    read_raw(path)?
        .into_iter()
        .map(|Parsed { line, raw }| {
            let invalid = |message: String| Error::Validation {
                path: path.to_path_buf(),
                line,
                message,
            };
            let label = match raw.label {
                Some(0) => Label::Generated,
                Some(1) => Label::Human,
                Some(other) => return Err(invalid(format!("label must be 0 or 1, got {other}"))),
                None => return Err(invalid("missing label".into())),
            };
            Ok(EmbeddingRecord {
                id: raw.id,
                label,
                domain: raw.domain.unwrap_or_else(|| DEFAULT_DOMAIN.into()),
                embedding: raw.embedding,
            })
        })
        .collect()
}

/// Loads records for classification; labels may be absent.
pub fn load_queries_jsonl(path: impl AsRef<Path>) -> Result<Vec<QueryRecord>> {
    Ok(read_raw(path.as_ref())?
        .into_iter()
        .map(|Parsed { raw, .. }| QueryRecord {
            id: raw.id,
            domain: raw.domain.unwrap_or_else(|| DEFAULT_DOMAIN.into()),
            embedding: raw.embedding,
        })
        .collect())
}

pub fn write_jsonl(path: impl AsRef<Path>, records: &[EmbeddingRecord]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    for record in records {
        serde_json::to_writer(&mut out, record).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<EmbeddingRecord>,
    pub test: Vec<EmbeddingRecord>,
    pub seed: u64,
    pub ratio: f64,
}

/// Shuffles each label group with `seed` and sends `round(ratio * n)` of
/// it to the training side. Rounding bounds how closely small test sets can
/// match the overall label proportions.
pub fn stratified_split(
    records: &[EmbeddingRecord],
    ratio: f64,
    seed: u64,
) -> Result<DatasetSplit> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!(
            "split ratio must lie in (0, 1), got {ratio}"
        )));
    }
    require_both_labels(records)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for label in Label::ALL {
        let mut group: Vec<&EmbeddingRecord> =
            records.iter().filter(|r| r.label == label).collect();
        group.shuffle(&mut rng);
        let cut = (ratio * group.len() as f64).round() as usize;
        train.extend(group[..cut].iter().map(|r| (*r).clone()));
        test.extend(group[cut..].iter().map(|r| (*r).clone()));
    }
    train.shuffle(&mut rng);
    test.shuffle(&mut rng);
    Ok(DatasetSplit {
        train,
        test,
        seed,
        ratio,
    })
}

pub(crate) fn require_both_labels(records: &[EmbeddingRecord]) -> Result<()> {
    for label in Label::ALL {
        if !records.iter().any(|r| r.label == label) {
            return Err(Error::Config(format!(
                "dataset has no samples with label {label}; both classes are required"
            )));
        }
    }
    Ok(())
}
