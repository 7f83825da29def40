//! JSON Lines input for dedup runs.
//!
//! One JSON object per line describes one incoming document:
//!
//! ```json
//! {"label":"page-01","query_id":"q01","source":"primary","payload_b64":"aGk="}
//! {"label":"page-02","query_id":"q02","source":"primary","path":"docs/page-02.html"}
//! ```
//!
//! Exactly one of `payload_b64` / `path` must be present; `path` is resolved
//! relative to a caller-supplied base directory (normally the input file's
//! parent). The optional `query_text` defaults to the query id. Blank lines
//! are skipped; anything else malformed is rejected with its line number.

use std::io;
use std::path::Path;

use base64::Engine as _;
use serde::Deserialize;
use thiserror::Error;

use crate::sources::{QuerySpec, ResultDocument, SourceName};

#[derive(Debug, Error)]
pub enum StreamParseError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: cannot read payload file '{path}': {source}")]
    PayloadRead {
        line: usize,
        path: String,
        source: io::Error,
    },
}

/// A parsed document plus the input line it came from, for error reporting
/// further down the run.
#[derive(Debug, Clone)]
pub struct StreamItem {
    pub line: usize,
    pub document: ResultDocument,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    label: String,
    query_id: String,
    source: String,
    #[serde(default)]
    payload_b64: Option<String>,
    #[serde(default)]
    path: Option<String>,
    #[serde(default)]
    query_text: Option<String>,
}

pub fn parse_jsonl(text: &str, base_dir: &Path) -> Result<Vec<StreamItem>, StreamParseError> {
    let mut items = Vec::new();

    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| StreamParseError::Malformed { line, reason };

        let record: RawRecord =
            serde_json::from_str(raw_line).map_err(|e| malformed(e.to_string()))?;

        let payload = match (&record.payload_b64, &record.path) {
            (Some(b64), None) => base64::engine::general_purpose::STANDARD
                .decode(b64)
                .map_err(|e| malformed(format!("bad payload_b64: {e}")))?,
            (None, Some(rel)) => {
                let path = base_dir.join(rel);
                std::fs::read(&path).map_err(|e| StreamParseError::PayloadRead {
                    line,
                    path: path.display().to_string(),
                    source: e,
                })?
            }
            _ => {
                return Err(malformed(
                    "exactly one of 'payload_b64' or 'path' is required".into(),
                ))
            }
        };

        let query_text = record.query_text.unwrap_or_else(|| record.query_id.clone());
        let query =
            QuerySpec::new(record.query_id, query_text).map_err(|e| malformed(e.to_string()))?;

        items.push(StreamItem {
            line,
            document: ResultDocument {
                payload,
                source_ref: SourceName::new(record.source),
                query,
                label: record.label,
            },
        });
    }

    Ok(items)
}
