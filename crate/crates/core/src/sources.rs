//! Data sources and the duplicate-confirmation probe.
//!
//! A source is anything that can answer a query with zero or more documents.
//! The pipeline re-queries a *candidate entry's* source with the *incoming*
//! document's query to decide whether a tentative duplicate is real; that
//! probe is [`confirm_duplicate`]. Sources are looked up by name in an
//! immutable-after-startup [`SourceRegistry`].

use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::fingerprint::{compute_digest, Digest};

/// Registry name of a data source.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct SourceName(String);

impl SourceName {
    pub fn new(name: impl Into<String>) -> Self {
        Self(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SourceName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SourceName {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for SourceName {
    fn from(s: String) -> Self {
        Self(s)
    }
}

/// Identifier of a query, unique within a run.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(transparent)]
pub struct QueryId(String);

impl QueryId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for QueryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for QueryId {
    fn from(s: &str) -> Self {
        Self(s.to_owned())
    }
}

impl From<String> for QueryId {
    fn from(s: String) -> Self {
        Self(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("query id must be non-empty")]
pub struct EmptyQueryId;

/// A query as posed to a source: an id plus its text.
///
/// Equality and hashing consider only the id — two specs with the same id are
/// the same query even if their texts drifted apart.
#[derive(Debug, Clone)]
pub struct QuerySpec {
    query_id: QueryId,
    text: String,
}

impl QuerySpec {
    pub fn new(query_id: impl Into<String>, text: impl Into<String>) -> Result<Self, EmptyQueryId> {
        let query_id = query_id.into();
        if query_id.is_empty() {
            return Err(EmptyQueryId);
        }
        Ok(Self {
            query_id: QueryId(query_id),
            text: text.into(),
        })
    }

    /// A spec whose text is its id; enough for sources that key on ids.
    pub fn from_id(query_id: impl Into<String>) -> Result<Self, EmptyQueryId> {
        let query_id = query_id.into();
        let text = query_id.clone();
        Self::new(query_id, text)
    }

    pub fn query_id(&self) -> &QueryId {
        &self.query_id
    }

    pub fn text(&self) -> &str {
        &self.text
    }
}

impl PartialEq for QuerySpec {
    fn eq(&self, other: &Self) -> bool {
        self.query_id == other.query_id
    }
}

impl Eq for QuerySpec {}

impl std::hash::Hash for QuerySpec {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.query_id.hash(state);
    }
}

/// One document returned by a source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultDocument {
    pub payload: Vec<u8>,
    pub source_ref: SourceName,
    pub query: QuerySpec,
    /// Human-readable handle (file name, URL, …); not used for matching.
    pub label: String,
}

/// The source could not answer at all — distinct from answering with nothing.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("source '{source_ref}' unavailable: {reason}")]
pub struct SourceUnavailable {
    pub source_ref: SourceName,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown source '{0}'")]
pub struct UnknownSource(pub SourceName);

/// Anything that can answer queries with documents.
pub trait SourceAdapter: Send + Sync {
    /// The registry name; stamped on every document this adapter returns.
    fn source_ref(&self) -> &SourceName;

    /// Executes `query`. `Ok(vec![])` means the source answered and had
    /// nothing; `Err` means it could not answer at all.
    fn execute(&self, query: &QuerySpec) -> Result<Vec<ResultDocument>, SourceUnavailable>;
}

/// Serves files from `<root>/<query_id>/` — every regular file in that
/// directory is one result document for the query, in file-name order.
pub struct FileSource {
    name: SourceName,
    root: PathBuf,
}

impl FileSource {
    pub fn new(name: impl Into<SourceName>, root: impl Into<PathBuf>) -> Self {
        Self {
            name: name.into(),
            root: root.into(),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn unavailable(&self, reason: impl Into<String>) -> SourceUnavailable {
        SourceUnavailable {
            source_ref: self.name.clone(),
            reason: reason.into(),
        }
    }
}

impl SourceAdapter for FileSource {
    fn source_ref(&self) -> &SourceName {
        &self.name
    }

    fn execute(&self, query: &QuerySpec) -> Result<Vec<ResultDocument>, SourceUnavailable> {
        if !self.root.is_dir() {
            return Err(
                self.unavailable(format!("root '{}' is not a directory", self.root.display()))
            );
        }
        let dir = self.root.join(query.query_id().as_str());
        if !dir.exists() {
            // The source is up; it just has nothing for this query.
            return Ok(Vec::new());
        }

        let mut paths = Vec::new();
        let entries = std::fs::read_dir(&dir).map_err(|e| self.unavailable(e.to_string()))?;
        for entry in entries {
            let entry = entry.map_err(|e| self.unavailable(e.to_string()))?;
            let ft = entry
                .file_type()
                .map_err(|e| self.unavailable(e.to_string()))?;
            if ft.is_file() {
                paths.push(entry.path());
            }
        }
        paths.sort();

        let mut docs = Vec::with_capacity(paths.len());
        for path in paths {
            let payload = std::fs::read(&path)
                .map_err(|e| self.unavailable(format!("{}: {e}", path.display())))?;
            docs.push(ResultDocument {
                payload,
                source_ref: self.name.clone(),
                query: query.clone(),
                label: path
                    .file_name()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_default(),
            });
        }
        Ok(docs)
    }
}

/// In-memory source; handy for embedding and tests.
pub struct MemorySource {
    name: SourceName,
    docs: HashMap<String, Vec<Vec<u8>>>,
    outage: Option<String>,
}

impl MemorySource {
    pub fn new(name: impl Into<SourceName>) -> Self {
        Self {
            name: name.into(),
            docs: HashMap::new(),
            outage: None,
        }
    }

    /// A source that fails every query with the given reason.
    pub fn down(name: impl Into<SourceName>, reason: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            docs: HashMap::new(),
            outage: Some(reason.into()),
        }
    }

    pub fn with_doc(mut self, query_id: impl Into<String>, payload: impl Into<Vec<u8>>) -> Self {
        self.docs
            .entry(query_id.into())
            .or_default()
            .push(payload.into());
        self
    }
}

impl SourceAdapter for MemorySource {
    fn source_ref(&self) -> &SourceName {
        &self.name
    }

    fn execute(&self, query: &QuerySpec) -> Result<Vec<ResultDocument>, SourceUnavailable> {
        if let Some(reason) = &self.outage {
            return Err(SourceUnavailable {
                source_ref: self.name.clone(),
                reason: reason.clone(),
            });
        }
        let payloads = self
            .docs
            .get(query.query_id().as_str())
            .cloned()
            .unwrap_or_default();
        Ok(payloads
            .into_iter()
            .enumerate()
            .map(|(i, payload)| ResultDocument {
                payload,
                source_ref: self.name.clone(),
                query: query.clone(),
                label: format!("{}#{i}", query.query_id()),
            })
            .collect())
    }
}

/// Name → adapter map. Populate at startup, then share immutably.
#[derive(Default)]
pub struct SourceRegistry {
    adapters: HashMap<SourceName, Arc<dyn SourceAdapter>>,
}

impl fmt::Debug for SourceRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SourceRegistry")
            .field("sources", &self.names())
            .finish()
    }
}

impl SourceRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers an adapter under its own `source_ref`; replaces any previous
    /// adapter with the same name.
    pub fn register(&mut self, adapter: Arc<dyn SourceAdapter>) {
        self.adapters.insert(adapter.source_ref().clone(), adapter);
    }

    pub fn get(&self, name: &SourceName) -> Result<&dyn SourceAdapter, UnknownSource> {
        self.adapters
            .get(name)
            .map(|a| a.as_ref())
            .ok_or_else(|| UnknownSource(name.clone()))
    }

    pub fn contains(&self, name: &SourceName) -> bool {
        self.adapters.contains_key(name)
    }

    /// Registered names in sorted order.
    pub fn names(&self) -> Vec<&SourceName> {
        let mut names: Vec<_> = self.adapters.keys().collect();
        names.sort();
        names
    }

    pub fn len(&self) -> usize {
        self.adapters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adapters.is_empty()
    }
}

/// What the probe saw when it re-ran the query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum ConfirmationOutcome {
    /// The source answered with `probe_result_count` (≥ 1) documents
    /// satisfying the confirmation predicate.
    Confirmed { probe_result_count: usize },
    /// The source answered, but nothing satisfied the predicate.
    NotConfirmed,
    /// The source could not answer; how this counts is the caller's
    /// failure-mode policy, not a property of the outcome itself.
    Unavailable { reason: String },
}

impl ConfirmationOutcome {
    pub fn is_confirmed(&self) -> bool {
        matches!(self, ConfirmationOutcome::Confirmed { .. })
    }
}

/// What counts as a confirming document in a probe answer.
#[derive(Debug, Clone, Copy)]
pub enum ConfirmPredicate<'a> {
    /// Any document at all.
    NonEmpty,
    /// Only documents whose payload digest equals this digest.
    ContentEqual { digest: &'a Digest },
}

/// Config-level selector for [`ConfirmPredicate`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConfirmMode {
    #[default]
    NonEmpty,
    ContentEqual,
}

impl fmt::Display for ConfirmMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConfirmMode::NonEmpty => "nonempty",
            ConfirmMode::ContentEqual => "content-equal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown confirm mode '{0}' (expected 'nonempty' or 'content-equal')")]
pub struct UnknownConfirmMode(pub String);

impl FromStr for ConfirmMode {
    type Err = UnknownConfirmMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nonempty" | "non-empty" => Ok(ConfirmMode::NonEmpty),
            "content-equal" | "contentequal" => Ok(ConfirmMode::ContentEqual),
            other => Err(UnknownConfirmMode(other.to_owned())),
        }
    }
}

/// Re-runs `query` against `source_ref` and reports whether the answer
/// confirms a suspected duplicate under `predicate`.
///
/// Unavailability is an *outcome*, not an error — only a source name missing
/// from the registry is an error, since that is a configuration bug rather
/// than a runtime condition.
pub fn confirm_duplicate(
    registry: &SourceRegistry,
    source_ref: &SourceName,
    query: &QuerySpec,
    predicate: ConfirmPredicate<'_>,
) -> Result<ConfirmationOutcome, UnknownSource> {
    let adapter = registry.get(source_ref)?;
    let docs = match adapter.execute(query) {
        Ok(docs) => docs,
        Err(outage) => {
            return Ok(ConfirmationOutcome::Unavailable {
                reason: outage.reason,
            })
        }
    };
    let matching = match predicate {
        ConfirmPredicate::NonEmpty => docs.len(),
        ConfirmPredicate::ContentEqual { digest } => docs
            .iter()
            .filter(|d| compute_digest(&d.payload, digest.algorithm()) == *digest)
            .count(),
    };
    Ok(if matching > 0 {
        ConfirmationOutcome::Confirmed {
            probe_result_count: matching,
        }
    } else {
        ConfirmationOutcome::NotConfirmed
    })
}

/// Errors from parsing a source-mapping config file.
#[derive(Debug, Error)]
pub enum SourceConfigError {
    #[error("source config line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("source config line {line}: duplicate source '{name}'")]
    Duplicate { line: usize, name: SourceName },
}

/// Parses the source mapping format: one `name = file:<root>` per line,
/// `#` comments and blank lines ignored. Relative roots resolve against
/// `base_dir`.
pub fn parse_source_config(
    text: &str,
    base_dir: &Path,
) -> Result<Vec<(SourceName, PathBuf)>, SourceConfigError> {
    let mut mappings: Vec<(SourceName, PathBuf)> = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (name, target) = line
            .split_once('=')
            .ok_or_else(|| SourceConfigError::Parse {
                line: line_no,
                reason: "expected 'name = file:<root>'".into(),
            })?;
        let name = SourceName::new(name.trim());
        if name.as_str().is_empty() {
            return Err(SourceConfigError::Parse {
                line: line_no,
                reason: "source name must be non-empty".into(),
            });
        }
        if mappings.iter().any(|(n, _)| *n == name) {
            return Err(SourceConfigError::Duplicate {
                line: line_no,
                name,
            });
        }
        let target = target.trim();
        let root = target
            .strip_prefix("file:")
            .ok_or_else(|| SourceConfigError::Parse {
                line: line_no,
                reason: format!("unknown adapter kind in '{target}' (only 'file:' is supported)"),
            })?;
        let root = Path::new(root);
        let root = if root.is_absolute() {
            root.to_path_buf()
        } else {
            base_dir.join(root)
        };
        mappings.push((name, root));
    }
    Ok(mappings)
}

/// Builds a registry of [`FileSource`]s from a config file's text.
pub fn registry_from_config(
    text: &str,
    base_dir: &Path,
) -> Result<SourceRegistry, SourceConfigError> {
    let mut registry = SourceRegistry::new();
    for (name, root) in parse_source_config(text, base_dir)? {
        registry.register(Arc::new(FileSource::new(name, root)));
    }
    Ok(registry)
}
