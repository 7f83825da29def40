//! Desk-scale study harness: fingerprint a corpus, perturb it, fingerprint
//! again, write the comparison out as CSV, and run the whole dedup pipeline
//! end to end over originals plus perturbed copies.

pub mod corpus;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::fingerprint::{compute_fingerprint, DigestAlgorithm};
use crate::index::DedupIndex;
use crate::perturb::{apply_plan, PerturbationPlan};
use crate::pipeline::{process_stream, PipelineConfig, StreamReport};
use crate::sources::{FileSource, QueryId, QuerySpec, ResultDocument, SourceName, SourceRegistry};

/// Source name reserved for the perturbed copies in end-to-end runs. Its
/// backing tree is always empty: a probe against it can never confirm.
pub const MIRROR_SOURCE: &str = "mirror";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("manifest line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("manifest line {line}: duplicate label '{label}'")]
    DuplicateLabel { line: usize, label: String },
    #[error("manifest entry '{label}': file '{path}' does not exist")]
    MissingFile { label: String, path: PathBuf },
}

/// One corpus document: where it lives and how it enters the pipeline.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub label: String,
    pub relative_path: PathBuf,
    pub query_id: QueryId,
    pub source: SourceName,
}

/// A corpus root plus its document list.
///
/// Text format, one entry per line: `label path query_id source`, fields
/// whitespace-separated, `#` comments and blank lines ignored. Paths are
/// relative to the manifest file's directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusManifest {
    root: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl CorpusManifest {
    pub fn load(path: &Path) -> Result<Self, ManifestError> {
        let text = std::fs::read_to_string(path)?;
        let root = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        Self::parse(&text, root)
    }

    pub fn parse(text: &str, root: PathBuf) -> Result<Self, ManifestError> {
        let mut entries: Vec<ManifestEntry> = Vec::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw_line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            let [label, path, query_id, source] = fields.as_slice() else {
                return Err(ManifestError::Parse {
                    line,
                    reason: format!(
                        "expected 4 fields 'label path query_id source', got {}",
                        fields.len()
                    ),
                });
            };
            if entries.iter().any(|e| e.label == *label) {
                return Err(ManifestError::DuplicateLabel {
                    line,
                    label: (*label).to_owned(),
                });
            }
            let entry = ManifestEntry {
                label: (*label).to_owned(),
                relative_path: PathBuf::from(path),
                query_id: (*query_id).into(),
                source: (*source).into(),
            };
            let full = root.join(&entry.relative_path);
            if !full.exists() {
                return Err(ManifestError::MissingFile {
                    label: entry.label,
                    path: full,
                });
            }
            entries.push(entry);
        }
        Ok(Self { root, entries })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    pub fn path_of(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.relative_path)
    }
}

/// One fingerprinted corpus document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FingerprintRow {
    pub label: String,
    pub digest_hex: String,
    pub size_bytes: u64,
}

/// A document that could not be processed; the run carries on without it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowError {
    pub label: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FingerprintTable {
    pub rows: Vec<FingerprintRow>,
    pub errors: Vec<RowError>,
}

/// Fingerprints every manifest entry in order. Unreadable files become
/// [`RowError`]s instead of sinking the run.
pub fn run_fingerprint_table(
    manifest: &CorpusManifest,
    algorithm: DigestAlgorithm,
) -> FingerprintTable {
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for entry in manifest.entries() {
        match std::fs::read(manifest.path_of(entry)) {
            Ok(payload) => {
                let fp = compute_fingerprint(&payload, algorithm);
                rows.push(FingerprintRow {
                    label: entry.label.clone(),
                    digest_hex: fp.digest.to_hex(),
                    size_bytes: fp.size_bytes,
                });
            }
            Err(e) => errors.push(RowError {
                label: entry.label.clone(),
                message: e.to_string(),
            }),
        }
    }
    FingerprintTable { rows, errors }
}

/// Before/after comparison for one document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentRow {
    pub label: String,
    pub original_digest_hex: String,
    pub original_size: u64,
    pub perturbed_digest_hex: String,
    pub perturbed_size: u64,
    pub size_delta: u64,
    pub digest_changed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExperimentSummary {
    pub docs: usize,
    pub size_preserved: usize,
    pub digest_changed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
    pub errors: Vec<RowError>,
}

impl ExperimentReport {
    pub fn summary(&self) -> ExperimentSummary {
        ExperimentSummary {
            docs: self.rows.len(),
            size_preserved: self.rows.iter().filter(|r| r.size_delta == 0).count(),
            digest_changed: self.rows.iter().filter(|r| r.digest_changed).count(),
        }
    }
}

/// Fingerprints each document before and after perturbation by `plan`.
pub fn run_perturbation_experiment(
    manifest: &CorpusManifest,
    plan: &PerturbationPlan,
    algorithm: DigestAlgorithm,
) -> ExperimentReport {
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for entry in manifest.entries() {
        let payload = match std::fs::read(manifest.path_of(entry)) {
            Ok(p) => p,
            Err(e) => {
                errors.push(RowError {
                    label: entry.label.clone(),
                    message: e.to_string(),
                });
                continue;
            }
        };
        let original = compute_fingerprint(&payload, algorithm);
        let perturbed = compute_fingerprint(&apply_plan(&payload, plan).payload, algorithm);
        rows.push(ExperimentRow {
            label: entry.label.clone(),
            original_digest_hex: original.digest.to_hex(),
            original_size: original.size_bytes,
            perturbed_digest_hex: perturbed.digest.to_hex(),
            perturbed_size: perturbed.size_bytes,
            size_delta: original.size_bytes.abs_diff(perturbed.size_bytes),
            digest_changed: original.digest != perturbed.digest,
        });
    }
    ExperimentReport { rows, errors }
}

/// `bytes` as KiB with one decimal, rounding half up — integer math so the
/// rendering can never drift between platforms.
pub fn kib_one_decimal(bytes: u64) -> String {
    let tenths = (bytes * 10 + 512) / 1024;
    format!("{}.{}", tenths / 10, tenths % 10)
}

/// First eight hex digits of a digest as an integer, for plotting digests on
/// a numeric axis next to sizes.
pub fn digest_series_value(digest_hex: &str) -> u64 {
    u64::from_str_radix(&digest_hex[..8], 16).expect("digest hex strings are lowercase hex")
}

/// Writes `table1.csv` (originals), `table2.csv` (perturbed), and
/// `series.csv` (both, numeric) into `out_dir`.
pub fn write_csv_reports(report: &ExperimentReport, out_dir: &Path) -> Result<(), csv::Error> {
    let mut table1 = csv::Writer::from_path(out_dir.join("table1.csv"))?;
    table1.write_record(["serial", "label", "digest", "size_bytes", "size_kib"])?;
    for (i, row) in report.rows.iter().enumerate() {
        table1.write_record([
            &(i + 1).to_string(),
            &row.label,
            &row.original_digest_hex,
            &row.original_size.to_string(),
            &kib_one_decimal(row.original_size),
        ])?;
    }
    table1.flush()?;

    let mut table2 = csv::Writer::from_path(out_dir.join("table2.csv"))?;
    table2.write_record(["serial", "label", "digest", "size_bytes", "size_kib"])?;
    for (i, row) in report.rows.iter().enumerate() {
        table2.write_record([
            &(i + 1).to_string(),
            &row.label,
            &row.perturbed_digest_hex,
            &row.perturbed_size.to_string(),
            &kib_one_decimal(row.perturbed_size),
        ])?;
    }
    table2.flush()?;

    let mut series = csv::Writer::from_path(out_dir.join("series.csv"))?;
    series.write_record([
        "serial",
        "label",
        "size_before",
        "size_after",
        "digest_before_u32",
        "digest_after_u32",
    ])?;
    for (i, row) in report.rows.iter().enumerate() {
        series.write_record([
            &(i + 1).to_string(),
            &row.label,
            &row.original_size.to_string(),
            &row.perturbed_size.to_string(),
            &digest_series_value(&row.original_digest_hex).to_string(),
            &digest_series_value(&row.perturbed_digest_hex).to_string(),
        ])?;
    }
    series.flush()?;
    Ok(())
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("source name '{MIRROR_SOURCE}' is reserved for perturbed copies")]
    ReservedSourceName,
}

/// The stream an end-to-end run feeds the pipeline: all originals first
/// (under their manifest sources), then one perturbed copy of each (labeled
/// `<label>.perturbed`, under [`MIRROR_SOURCE`]).
pub fn build_stream(
    manifest: &CorpusManifest,
    plan: &PerturbationPlan,
) -> Result<Vec<ResultDocument>, ExperimentError> {
    let mut originals = Vec::with_capacity(manifest.entries().len());
    for entry in manifest.entries() {
        let payload = std::fs::read(manifest.path_of(entry))?;
        // manifest parsing guarantees a non-empty query id
        let query = QuerySpec::from_id(entry.query_id.as_str()).expect("manifest query id");
        originals.push(ResultDocument {
            payload,
            source_ref: entry.source.clone(),
            query,
            label: entry.label.clone(),
        });
    }

    let mut docs = originals.clone();
    for doc in &originals {
        docs.push(ResultDocument {
            payload: apply_plan(&doc.payload, plan).payload,
            source_ref: SourceName::new(MIRROR_SOURCE),
            query: doc.query.clone(),
            label: format!("{}.perturbed", doc.label),
        });
    }
    Ok(docs)
}

/// Materializes probe-able source trees under `sources_root` and builds the
/// registry over them: every manifest source serves its own documents at
/// `<sources_root>/<source>/<query_id>/<file>`, and [`MIRROR_SOURCE`] serves
/// an intentionally empty tree.
pub fn build_probe_registry(
    manifest: &CorpusManifest,
    sources_root: &Path,
) -> Result<SourceRegistry, ExperimentError> {
    if manifest
        .entries()
        .iter()
        .any(|e| e.source.as_str() == MIRROR_SOURCE)
    {
        return Err(ExperimentError::ReservedSourceName);
    }

    for entry in manifest.entries() {
        let dir = sources_root
            .join(entry.source.as_str())
            .join(entry.query_id.as_str());
        std::fs::create_dir_all(&dir)?;
        let file_name = entry
            .relative_path
            .file_name()
            .map(|n| n.to_owned())
            .unwrap_or_else(|| entry.label.clone().into());
        std::fs::copy(manifest.path_of(entry), dir.join(file_name))?;
    }

    let mirror_root = sources_root.join(MIRROR_SOURCE);
    std::fs::create_dir_all(&mirror_root)?;

    let mut registry = SourceRegistry::new();
    let mut seen = std::collections::BTreeSet::new();
    for entry in manifest.entries() {
        if seen.insert(entry.source.clone()) {
            registry.register(std::sync::Arc::new(FileSource::new(
                entry.source.clone(),
                sources_root.join(entry.source.as_str()),
            )));
        }
    }
    registry.register(std::sync::Arc::new(FileSource::new(
        MIRROR_SOURCE,
        mirror_root,
    )));
    Ok(registry)
}

/// Everything an end-to-end run produces.
pub struct EndToEndOutcome {
    pub report: StreamReport,
    pub index: DedupIndex,
}

/// Runs the full study: materialize probe trees under `workdir/sources`,
/// stream originals + perturbed copies through the pipeline, return the
/// report and the final index.
pub fn run_end_to_end(
    manifest: &CorpusManifest,
    plan: &PerturbationPlan,
    config: &PipelineConfig,
    workdir: &Path,
) -> Result<EndToEndOutcome, ExperimentError> {
    let registry = build_probe_registry(manifest, &workdir.join("sources"))?;
    let docs = build_stream(manifest, plan)?;
    let mut index = DedupIndex::new();
    let report = process_stream(&docs, &mut index, &registry, config);
    Ok(EndToEndOutcome { report, index })
}
