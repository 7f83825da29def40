//! Duplicate filtering for query results gathered from many sources.
//!
//! The same document often comes back from several places under different
//! names, and mirrored copies routinely differ in formatting while keeping
//! (almost exactly) the same byte count. This crate removes such duplicates
//! in two tiers: a content-digest equality check catches byte-identical
//! copies, and a size-band proximity check catches reformatted ones. Neither
//! tier trusts itself — a suspected duplicate is only discarded after the
//! original's own source, re-queried with the incoming query, confirms it
//! still serves matching data.
//!
//! Module tour:
//! - [`fingerprint`]: digests + byte sizes, incremental or one-shot
//! - [`index`]: the accepted-results index, its lookups, and snapshots
//! - [`sources`]: source adapters, the registry, and the confirmation probe
//! - [`pipeline`]: the per-document decision procedure and stream driver
//! - [`stream`]: JSON Lines input format for dedup runs
//! - [`perturb`]: size-preserving payload mutations (study tooling)
//! - [`experiment`]: corpus harness producing CSV/JSON study reports

pub mod experiment;
pub mod fingerprint;
pub mod index;
pub mod perturb;
pub mod pipeline;
pub mod sources;
pub mod stream;

pub use fingerprint::{compute_digest, compute_fingerprint, Digest, DigestAlgorithm, Fingerprint};
pub use index::{DedupIndex, IndexEntry, IndexStats};
pub use pipeline::{
    process_result, process_stream, DedupDecision, PipelineConfig, StreamReport, Verdict,
    DEFAULT_THRESHOLD_BYTES,
};
pub use sources::{
    ConfirmMode, ConfirmationOutcome, FileSource, MemorySource, QuerySpec, ResultDocument,
    SourceAdapter, SourceName, SourceRegistry,
};
