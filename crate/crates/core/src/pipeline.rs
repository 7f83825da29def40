//! The dedup decision procedure.
//!
//! Two tiers, in fixed order: digest equality first, then size-band
//! proximity over entries whose digest differs. A tier match alone never
//! condemns a document — every candidate must be confirmed by re-querying
//! the candidate's own source with the incoming document's query. Confirmed
//! duplicates are discarded; everything else is accepted into the index,
//! marked [`Verdict::UniqueUnconfirmed`] when at least one probe ran and
//! none confirmed.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use thiserror::Error;

use crate::fingerprint::{compute_fingerprint, DigestAlgorithm};
use crate::index::{DedupIndex, IndexEntry};
use crate::sources::{
    confirm_duplicate, ConfirmMode, ConfirmPredicate, ConfirmationOutcome, ResultDocument,
    SourceRegistry, UnknownSource,
};

/// Default size-band threshold: 50 KiB.
pub const DEFAULT_THRESHOLD_BYTES: u64 = 50 * 1024;

/// How an unreachable source counts during confirmation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureMode {
    /// Unreachable never confirms — prefer keeping a possible duplicate over
    /// dropping a possible original.
    #[default]
    FailOpen,
    /// Unreachable counts as confirmation — prefer dropping.
    FailClosed,
}

impl fmt::Display for FailureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailureMode::FailOpen => "open",
            FailureMode::FailClosed => "closed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown failure mode '{0}' (expected 'open' or 'closed')")]
pub struct UnknownFailureMode(pub String);

impl FromStr for FailureMode {
    type Err = UnknownFailureMode;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "open" | "fail-open" => Ok(FailureMode::FailOpen),
            "closed" | "fail-closed" => Ok(FailureMode::FailClosed),
            other => Err(UnknownFailureMode(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Inclusive size-band half-width in bytes.
    pub threshold_bytes: u64,
    pub failure_mode: FailureMode,
    pub algorithm: DigestAlgorithm,
    pub confirm_mode: ConfirmMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            threshold_bytes: DEFAULT_THRESHOLD_BYTES,
            failure_mode: FailureMode::default(),
            algorithm: DigestAlgorithm::default(),
            confirm_mode: ConfirmMode::default(),
        }
    }
}

/// Final classification of one document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Verdict {
    /// Accepted; no candidate was even probed.
    #[serde(rename = "unique")]
    Unique,
    /// Discarded; a digest-equal entry's source confirmed.
    #[serde(rename = "dup_hash")]
    DuplicateByHash,
    /// Discarded; a size-near entry's source confirmed.
    #[serde(rename = "dup_size")]
    DuplicateBySize,
    /// Accepted, but at least one probe ran and none confirmed.
    #[serde(rename = "unique_unconfirmed")]
    UniqueUnconfirmed,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Unique => "unique",
            Verdict::DuplicateByHash => "dup_hash",
            Verdict::DuplicateBySize => "dup_size",
            Verdict::UniqueUnconfirmed => "unique_unconfirmed",
        }
    }

    pub fn is_duplicate(self) -> bool {
        matches!(self, Verdict::DuplicateByHash | Verdict::DuplicateBySize)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One confirmation probe, in the order it ran.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeRecord {
    /// Seq of the candidate entry whose source was probed.
    pub candidate_seq: u64,
    pub outcome: ConfirmationOutcome,
}

/// Everything decided about one document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DedupDecision {
    pub verdict: Verdict,
    /// The confirmed duplicate's counterpart; `None` unless discarded.
    pub matched_entry: Option<IndexEntry>,
    pub probes: Vec<ProbeRecord>,
}

/// Classifies `doc` against `index`, inserting it when it survives.
///
/// The only error is a source name that the registry cannot resolve — a
/// configuration bug. Runtime trouble (unreachable sources) is data, recorded
/// in the probe list and governed by [`FailureMode`].
pub fn process_result(
    doc: &ResultDocument,
    index: &mut DedupIndex,
    registry: &SourceRegistry,
    config: &PipelineConfig,
) -> Result<DedupDecision, UnknownSource> {
    // Fail fast if the document's own source is unregistered; a stream that
    // lies about provenance would otherwise poison later probes.
    registry.get(&doc.source_ref)?;

    let fingerprint = compute_fingerprint(&doc.payload, config.algorithm);
    let mut probes: Vec<ProbeRecord> = Vec::new();

    let hash_candidates: Vec<IndexEntry> = index
        .find_by_digest(&fingerprint.digest)
        .into_iter()
        .cloned()
        .collect();
    for entry in hash_candidates {
        if probe_candidate(&entry, doc, registry, config, &mut probes)? {
            return Ok(DedupDecision {
                verdict: Verdict::DuplicateByHash,
                matched_entry: Some(entry),
                probes,
            });
        }
    }

    // Digest-equal entries were already handled (and declined) above; the
    // size tier only ever sees true near-misses.
    let size_candidates: Vec<IndexEntry> = index
        .find_by_size_band(fingerprint.size_bytes, config.threshold_bytes)
        .into_iter()
        .filter(|e| e.digest != fingerprint.digest)
        .cloned()
        .collect();
    for entry in size_candidates {
        if probe_candidate(&entry, doc, registry, config, &mut probes)? {
            return Ok(DedupDecision {
                verdict: Verdict::DuplicateBySize,
                matched_entry: Some(entry),
                probes,
            });
        }
    }

    let verdict = if probes.is_empty() {
        Verdict::Unique
    } else {
        Verdict::UniqueUnconfirmed
    };
    index.insert(
        fingerprint,
        doc.source_ref.clone(),
        doc.query.query_id().clone(),
    );
    Ok(DedupDecision {
        verdict,
        matched_entry: None,
        probes,
    })
}

/// Runs one probe, appends its record, and says whether it confirmed under
/// the configured failure mode.
fn probe_candidate(
    entry: &IndexEntry,
    doc: &ResultDocument,
    registry: &SourceRegistry,
    config: &PipelineConfig,
    probes: &mut Vec<ProbeRecord>,
) -> Result<bool, UnknownSource> {
    let predicate = match config.confirm_mode {
        ConfirmMode::NonEmpty => ConfirmPredicate::NonEmpty,
        ConfirmMode::ContentEqual => ConfirmPredicate::ContentEqual {
            digest: &entry.digest,
        },
    };
    let outcome = confirm_duplicate(registry, &entry.source_ref, &doc.query, predicate)?;
    let confirmed = matches!(
        (&outcome, config.failure_mode),
        (ConfirmationOutcome::Confirmed { .. }, _)
            | (
                ConfirmationOutcome::Unavailable { .. },
                FailureMode::FailClosed
            )
    );
    probes.push(ProbeRecord {
        candidate_seq: entry.seq,
        outcome,
    });
    Ok(confirmed)
}

/// Per-verdict tally.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct VerdictCounts {
    pub unique: usize,
    pub dup_hash: usize,
    pub dup_size: usize,
    pub unique_unconfirmed: usize,
}

impl VerdictCounts {
    fn bump(&mut self, verdict: Verdict) {
        match verdict {
            Verdict::Unique => self.unique += 1,
            Verdict::DuplicateByHash => self.dup_hash += 1,
            Verdict::DuplicateBySize => self.dup_size += 1,
            Verdict::UniqueUnconfirmed => self.unique_unconfirmed += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.unique + self.dup_hash + self.dup_size + self.unique_unconfirmed
    }

    pub fn duplicates(&self) -> usize {
        self.dup_hash + self.dup_size
    }

    pub fn accepted(&self) -> usize {
        self.unique + self.unique_unconfirmed
    }
}

/// One stream document's worth of output.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecisionRecord {
    pub label: String,
    pub query_id: String,
    pub source: String,
    pub digest_hex: String,
    pub size_bytes: u64,
    pub decision: DedupDecision,
}

/// Where and why a stream run stopped early.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StreamAbort {
    /// Zero-based position in the input stream.
    pub doc_index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StreamReport {
    pub records: Vec<DecisionRecord>,
    pub counts: VerdictCounts,
    pub total_probes: usize,
    /// Present when the run stopped before consuming the whole stream;
    /// `records` then covers only the documents before the failure.
    pub aborted: Option<StreamAbort>,
}

impl StreamReport {
    /// Plain-text rendering: one aligned row per document plus a tally line.
    pub fn render_text(&self) -> String {
        use std::fmt::Write as _;

        let label_width = self
            .records
            .iter()
            .map(|r| r.label.len())
            .chain([5])
            .max()
            .unwrap();
        let verdict_width = "unique_unconfirmed".len();

        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<label_width$}  {:<verdict_width$}  {:>10}  {:<12}  {:>7}  {:>6}",
            "LABEL", "VERDICT", "SIZE", "DIGEST", "MATCHED", "PROBES"
        );
        for record in &self.records {
            let matched = record
                .decision
                .matched_entry
                .as_ref()
                .map(|e| e.seq.to_string())
                .unwrap_or_else(|| "-".into());
            let _ = writeln!(
                out,
                "{:<label_width$}  {:<verdict_width$}  {:>10}  {:<12}  {:>7}  {:>6}",
                record.label,
                record.decision.verdict.as_str(),
                record.size_bytes,
                &record.digest_hex[..12.min(record.digest_hex.len())],
                matched,
                record.decision.probes.len(),
            );
        }
        let _ = writeln!(
            out,
            "documents={} unique={} dup_hash={} dup_size={} unique_unconfirmed={} probes={}",
            self.counts.total(),
            self.counts.unique,
            self.counts.dup_hash,
            self.counts.dup_size,
            self.counts.unique_unconfirmed,
            self.total_probes,
        );
        if let Some(abort) = &self.aborted {
            let _ = writeln!(
                out,
                "aborted at document {}: {}",
                abort.doc_index, abort.message
            );
        }
        out
    }
}

/// Feeds `docs` through [`process_result`] in order, tallying as it goes.
///
/// A configuration error (unknown source) aborts the run: the report carries
/// the records decided so far plus an [`StreamAbort`] marker, and the index
/// keeps the accepted prefix.
pub fn process_stream(
    docs: &[ResultDocument],
    index: &mut DedupIndex,
    registry: &SourceRegistry,
    config: &PipelineConfig,
) -> StreamReport {
    let mut records = Vec::with_capacity(docs.len());
    let mut counts = VerdictCounts::default();
    let mut total_probes = 0;
    let mut aborted = None;

    for (doc_index, doc) in docs.iter().enumerate() {
        let fingerprint = compute_fingerprint(&doc.payload, config.algorithm);
        match process_result(doc, index, registry, config) {
            Ok(decision) => {
                counts.bump(decision.verdict);
                total_probes += decision.probes.len();
                records.push(DecisionRecord {
                    label: doc.label.clone(),
                    query_id: doc.query.query_id().to_string(),
                    source: doc.source_ref.to_string(),
                    digest_hex: fingerprint.digest.to_hex(),
                    size_bytes: fingerprint.size_bytes,
                    decision,
                });
            }
            Err(err) => {
                aborted = Some(StreamAbort {
                    doc_index,
                    message: err.to_string(),
                });
                break;
            }
        }
    }

    StreamReport {
        records,
        counts,
        total_probes,
        aborted,
    }
}
