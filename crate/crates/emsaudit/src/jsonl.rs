//! Line-delimited JSON IO with per-line error reporting and atomic writes.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use emsaudit_core::entities::{EntitySpan, Tag};
use emsaudit_core::records::{CaseRecord, MAX_SYSTOLIC_BP};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A case record plus the pipeline annotations that accumulate on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordDoc {
    #[serde(flatten)]
    pub record: CaseRecord,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tokens: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tags: Option<Vec<Tag>>,
}

impl RecordDoc {
    pub fn bare(record: CaseRecord) -> Self {
        RecordDoc {
            record,
            tokens: None,
            tags: None,
        }
    }
}

/// Gold annotations for one incident, parallel to the record file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldDoc {
    pub incident_id: String,
    pub tokens: Vec<String>,
    pub tags: Vec<Tag>,
    pub spans: Vec<EntitySpan>,
}

/// One manual tag correction: applied after weak labeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagPatch {
    pub incident_id: String,
    pub index: usize,
    pub tag: Tag,
}

/// A recoverable problem on one input line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for LineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

/// Parse every line of a JSONL file; malformed lines become [`LineError`]s
/// instead of aborting the load.
pub fn read_jsonl<T: DeserializeOwned>(
    path: &Path,
) -> Result<(Vec<T>, Vec<LineError>), JsonlError> {
    let file = File::open(path).map_err(|source| JsonlError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut items = Vec::new();
    let mut errors = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| JsonlError::Read {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<T>(&line) {
            Ok(item) => items.push(item),
            Err(e) => errors.push(LineError {
                line: idx + 1,
                message: e.to_string(),
            }),
        }
    }
    Ok((items, errors))
}

/// Write a whole file atomically (temp file in the same directory, then
/// rename) so interrupted runs never leave partial artifacts behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), JsonlError> {
    let wrap = |source: std::io::Error| JsonlError::Write {
        path: path.display().to_string(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir),
        None => tempfile::NamedTempFile::new(),
    }
    .map_err(wrap)?;
    tmp.write_all(bytes).map_err(wrap)?;
    tmp.flush().map_err(wrap)?;
    tmp.persist(path).map_err(|e| wrap(e.error))?;
    Ok(())
}

/// Write items as one JSON object per line, atomically.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), JsonlError> {
    let mut buf = Vec::new();
    for item in items {
        serde_json::to_writer(&mut buf, item).expect("serializable");
        buf.push(b'\n');
    }
    write_atomic(path, &buf)
}

/// Loaded records plus everything that went wrong line by line.
#[derive(Debug)]
pub struct LoadOutcome {
    pub docs: Vec<RecordDoc>,
    pub errors: Vec<LineError>,
}

/// Load and validate case records: parse failures, empty or duplicate
/// incident ids, and out-of-range SBP values are reported with line numbers
/// and the offending records skipped.
pub fn load_record_docs(path: &Path) -> Result<LoadOutcome, JsonlError> {
    let file = File::open(path).map_err(|source| JsonlError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let reader = BufReader::new(file);
    let mut docs: Vec<RecordDoc> = Vec::new();
    let mut errors = Vec::new();
    let mut seen_ids = std::collections::HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| JsonlError::Read {
            path: path.display().to_string(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: RecordDoc = match serde_json::from_str(&line) {
            Ok(doc) => doc,
            Err(e) => {
                errors.push(LineError {
                    line: line_no,
                    message: e.to_string(),
                });
                continue;
            }
        };
        if doc.record.incident_id.is_empty() {
            errors.push(LineError {
                line: line_no,
                message: "field incident_id must be non-empty".into(),
            });
            continue;
        }
        if let Some(sbp) = doc.record.systolic_bp {
            if sbp > MAX_SYSTOLIC_BP {
                errors.push(LineError {
                    line: line_no,
                    message: format!(
                        "field systolic_bp out of range: {sbp} > {MAX_SYSTOLIC_BP}"
                    ),
                });
                continue;
            }
        }
        if !seen_ids.insert(doc.record.incident_id.clone()) {
            errors.push(LineError {
                line: line_no,
                message: format!("duplicate incident_id {:?}", doc.record.incident_id),
            });
            continue;
        }
        docs.push(doc);
    }
    Ok(LoadOutcome { docs, errors })
}

/// Plain record loading, without pipeline annotations.
pub fn load_records(path: &Path) -> Result<(Vec<CaseRecord>, Vec<LineError>), JsonlError> {
    let outcome = load_record_docs(path)?;
    Ok((
        outcome.docs.into_iter().map(|d| d.record).collect(),
        outcome.errors,
    ))
}

/// Apply manual tag corrections to labeled docs, matching on incident id.
/// Out-of-range indices and unknown incidents are reported as errors.
pub fn apply_patches(docs: &mut [RecordDoc], patches: &[TagPatch]) -> Vec<String> {
    let mut problems = Vec::new();
    for patch in patches {
        let Some(doc) = docs
            .iter_mut()
            .find(|d| d.record.incident_id == patch.incident_id)
        else {
            problems.push(format!("patch for unknown incident {:?}", patch.incident_id));
            continue;
        };
        let Some(tags) = doc.tags.as_mut() else {
            problems.push(format!(
                "patch for unlabeled incident {:?}",
                patch.incident_id
            ));
            continue;
        };
        if patch.index >= tags.len() {
            problems.push(format!(
                "patch index {} out of range for incident {:?} ({} tokens)",
                patch.index,
                patch.incident_id,
                tags.len()
            ));
            continue;
        }
        tags[patch.index] = patch.tag;
    }
    problems
}
