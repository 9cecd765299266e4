//! JSONL readers and writers for datasets, corpora, feature files and score tables.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Document, HiddenFeature, QaExample};

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::from(e).context(path.display().to_string()))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line)
            .map_err(|e| Error::from(e).context(format!("{}:{}", path.display(), lineno + 1)))?;
        out.push(value);
    }
    Ok(out)
}

/// Serializes `items` one per line. The output is a pure function of the input.
pub fn to_jsonl_bytes<T: Serialize>(items: &[T]) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item)?;
        buf.push(b'\n');
    }
    Ok(buf)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&to_jsonl_bytes(items)?)?;
    w.flush()?;
    Ok(())
}

/// Loads a dataset and checks per-example invariants and id uniqueness.
pub fn load_dataset(path: &Path) -> Result<Vec<QaExample>> {
    let examples: Vec<QaExample> = read_jsonl(path)?;
    validate_dataset(&examples)?;
    Ok(examples)
}

pub fn validate_dataset(examples: &[QaExample]) -> Result<()> {
    let mut seen = HashSet::new();
    for ex in examples {
        ex.validate()?;
        if !seen.insert((ex.dataset.as_str(), ex.id.as_str())) {
            return Err(Error::data(format!("duplicate example id {} in {}", ex.id, ex.dataset)));
        }
    }
    Ok(())
}

pub fn load_corpus(path: &Path) -> Result<Vec<Document>> {
    let docs: Vec<Document> = read_jsonl(path)?;
    for d in &docs {
        if d.body.trim().is_empty() {
            return Err(Error::data(format!("document {} has an empty body", d.doc_id)));
        }
    }
    Ok(docs)
}

/// Loads hidden features and checks that every vector is finite with one shared dimension.
pub fn load_hidden_features(path: &Path) -> Result<Vec<HiddenFeature>> {
    let feats: Vec<HiddenFeature> = read_jsonl(path)?;
    validate_hidden_features(&feats)?;
    Ok(feats)
}

pub fn validate_hidden_features(feats: &[HiddenFeature]) -> Result<()> {
    let Some(first) = feats.first() else { return Ok(()) };
    let d = first.vector.len();
    for f in feats {
        if f.vector.len() != d {
            return Err(Error::data(format!(
                "feature {} has dimension {}, expected {d}",
                f.example_id,
                f.vector.len()
            )));
        }
        if f.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::data(format!("feature {} has non-finite entries", f.example_id)));
        }
    }
    Ok(())
}

/// One line of a score table file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreLine {
    pub example_id: String,
    pub method: String,
    pub value: f64,
}
