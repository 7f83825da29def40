//! `dupband` — duplicate-result filtering and the perturbation study from
//! the command line.
//!
//! Exit codes: 0 success, 1 runtime failure (unreadable input, aborted run,
//! per-file errors), 2 usage errors (clap's own).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use dupband_core::experiment::{self, corpus, CorpusManifest, ExperimentReport, RowError};
use dupband_core::fingerprint::{DigestAlgorithm, Fingerprinter};
use dupband_core::index::DedupIndex;
use dupband_core::perturb::{apply_plan, PerturbOperator, PerturbationPlan};
use dupband_core::pipeline::{process_stream, FailureMode, PipelineConfig};
use dupband_core::sources::{registry_from_config, ConfirmMode};
use dupband_core::stream::parse_jsonl;

#[derive(Parser)]
#[command(
    name = "dupband",
    version,
    about = "Filter duplicate query results by content digest and size band"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print digest and byte size for files
    Fingerprint(FingerprintArgs),
    /// Run a JSONL document stream through the dedup pipeline
    Dedup(DedupArgs),
    /// Apply size-preserving perturbations to every file in a directory
    Perturb(PerturbArgs),
    /// Run the perturbation study and end-to-end dedup over a corpus
    Experiment(ExperimentArgs),
    /// Print the contents of an index snapshot
    IndexInspect(IndexInspectArgs),
}

#[derive(Args)]
struct FingerprintArgs {
    /// Files to fingerprint
    #[arg(required = true)]
    paths: Vec<PathBuf>,
    /// Digest algorithm (md5 or sha256)
    #[arg(long, default_value = "md5")]
    algorithm: DigestAlgorithm,
}

#[derive(Args)]
struct DedupArgs {
    /// JSONL stream of incoming documents
    #[arg(long)]
    input: PathBuf,
    /// Source mapping file (`name = file:<root>` per line)
    #[arg(long)]
    sources: PathBuf,
    /// Size-band half-width in bytes (inclusive)
    #[arg(long, default_value_t = dupband_core::DEFAULT_THRESHOLD_BYTES)]
    threshold: u64,
    /// What an unreachable source means: open = not confirming, closed = confirming
    #[arg(long, default_value = "open")]
    fail_mode: FailureMode,
    /// What confirms a duplicate: nonempty or content-equal
    #[arg(long, default_value = "nonempty")]
    confirm: ConfirmMode,
    /// Digest algorithm (md5 or sha256)
    #[arg(long, default_value = "md5")]
    algorithm: DigestAlgorithm,
    /// Index snapshot to continue from and save back to
    #[arg(long)]
    index: Option<PathBuf>,
    /// Emit the full report as JSON instead of text
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct PerturbArgs {
    /// Directory of files to perturb (non-recursive)
    dir: PathBuf,
    /// Output directory (defaults to `<dir>-perturbed`)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated operators: wordshuffle, wsswap, case
    #[arg(long, default_value = "wordshuffle,wsswap,case")]
    ops: String,
    /// RNG seed
    #[arg(long, default_value_t = dupband_core::perturb::DEFAULT_PLAN_SEED)]
    seed: u64,
    /// How many times to run the operator list
    #[arg(long, default_value_t = 1)]
    rounds: u32,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Corpus manifest path, or "bundled" for the built-in corpus
    #[arg(long, default_value = "bundled")]
    corpus: String,
    /// Output directory for CSV/JSON reports (and the bundled corpus files)
    #[arg(long, default_value = "experiment-out")]
    out: PathBuf,
    /// Comma-separated operators: wordshuffle, wsswap, case
    #[arg(long, default_value = "wordshuffle,wsswap,case")]
    ops: String,
    /// RNG seed for the perturbation plan
    #[arg(long, default_value_t = dupband_core::perturb::DEFAULT_PLAN_SEED)]
    seed: u64,
    /// How many times to run the operator list
    #[arg(long, default_value_t = 1)]
    rounds: u32,
    /// Size-band half-width in bytes (inclusive)
    #[arg(long, default_value_t = dupband_core::DEFAULT_THRESHOLD_BYTES)]
    threshold: u64,
    /// What an unreachable source means: open = not confirming, closed = confirming
    #[arg(long, default_value = "open")]
    fail_mode: FailureMode,
    /// What confirms a duplicate: nonempty or content-equal
    #[arg(long, default_value = "nonempty")]
    confirm: ConfirmMode,
    /// Digest algorithm (md5 or sha256)
    #[arg(long, default_value = "md5")]
    algorithm: DigestAlgorithm,
}

#[derive(Args)]
struct IndexInspectArgs {
    /// Snapshot file to inspect
    snapshot: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            // "{:#}" keeps the whole cause chain on one line
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Fingerprint(args) => cmd_fingerprint(args),
        Command::Dedup(args) => cmd_dedup(args),
        Command::Perturb(args) => cmd_perturb(args),
        Command::Experiment(args) => cmd_experiment(args),
        Command::IndexInspect(args) => cmd_index_inspect(args),
    }
}

fn cmd_fingerprint(args: FingerprintArgs) -> anyhow::Result<ExitCode> {
    let mut failed = false;
    for path in &args.paths {
        match fingerprint_file(path, args.algorithm) {
            Ok((digest_hex, size)) => println!("{digest_hex}  {size:>12}  {}", path.display()),
            Err(err) => {
                eprintln!("error: {}: {err:#}", path.display());
                failed = true;
            }
        }
    }
    Ok(exit_code(failed))
}

fn fingerprint_file(path: &Path, algorithm: DigestAlgorithm) -> anyhow::Result<(String, u64)> {
    let mut file = std::fs::File::open(path)?;
    let mut fp = Fingerprinter::new(algorithm);
    std::io::copy(&mut file, &mut fp)?;
    let fingerprint = fp.finish();
    Ok((fingerprint.digest.to_hex(), fingerprint.size_bytes))
}

fn cmd_dedup(args: DedupArgs) -> anyhow::Result<ExitCode> {
    let sources_text = std::fs::read_to_string(&args.sources)
        .with_context(|| format!("reading sources file '{}'", args.sources.display()))?;
    let sources_base = parent_dir(&args.sources);
    let registry = registry_from_config(&sources_text, &sources_base)?;

    let input_text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading input '{}'", args.input.display()))?;
    let items = parse_jsonl(&input_text, &parent_dir(&args.input))?;

    let config = PipelineConfig {
        threshold_bytes: args.threshold,
        failure_mode: args.fail_mode,
        algorithm: args.algorithm,
        confirm_mode: args.confirm,
    };

    let mut index = match &args.index {
        Some(path) if path.exists() => DedupIndex::snapshot_load(path, Some(args.algorithm))
            .with_context(|| format!("loading index snapshot '{}'", path.display()))?,
        _ => DedupIndex::new(),
    };

    let lines: Vec<usize> = items.iter().map(|i| i.line).collect();
    let docs: Vec<_> = items.into_iter().map(|i| i.document).collect();
    let report = process_stream(&docs, &mut index, &registry, &config);

    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.render_text());
    }

    if let Some(abort) = &report.aborted {
        eprintln!(
            "error: input line {}: {}",
            lines.get(abort.doc_index).copied().unwrap_or(0),
            abort.message
        );
        return Ok(ExitCode::from(1));
    }

    // only a clean run persists the index; a partial one would bake in the abort
    if let Some(path) = &args.index {
        index
            .snapshot_save(path)
            .with_context(|| format!("saving index snapshot '{}'", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_perturb(args: PerturbArgs) -> anyhow::Result<ExitCode> {
    let plan = build_plan(&args.ops, args.seed, args.rounds)?;
    if !args.dir.is_dir() {
        bail!("'{}' is not a directory", args.dir.display());
    }
    let out_dir = args.out.clone().unwrap_or_else(|| {
        let mut name = args.dir.file_name().unwrap_or_default().to_os_string();
        name.push("-perturbed");
        args.dir.with_file_name(name)
    });
    std::fs::create_dir_all(&out_dir)?;

    let mut paths: Vec<PathBuf> = std::fs::read_dir(&args.dir)?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
        .map(|e| e.path())
        .collect();
    paths.sort();

    let mut failed = false;
    for path in &paths {
        let name = path
            .file_name()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        match std::fs::read(path) {
            Ok(payload) => {
                let outcome = apply_plan(&payload, &plan);
                std::fs::write(out_dir.join(&name), &outcome.payload)?;
                println!(
                    "{name}\tchanged={}\tbytes={}",
                    outcome.changed,
                    outcome.payload.len()
                );
            }
            Err(err) => {
                eprintln!("error: {}: {err}", path.display());
                failed = true;
            }
        }
    }
    Ok(exit_code(failed))
}

fn cmd_experiment(args: ExperimentArgs) -> anyhow::Result<ExitCode> {
    let plan = build_plan(&args.ops, args.seed, args.rounds)?;
    std::fs::create_dir_all(&args.out)?;

    let manifest: CorpusManifest = if args.corpus == "bundled" {
        corpus::materialize_bundled(&args.out.join("corpus"))?
    } else {
        CorpusManifest::load(Path::new(&args.corpus))
            .with_context(|| format!("loading corpus manifest '{}'", args.corpus))?
    };

    let report = experiment::run_perturbation_experiment(&manifest, &plan, args.algorithm);
    experiment::write_csv_reports(&report, &args.out)?;

    if !report.errors.is_empty() {
        print_row_errors(&report.errors);
        eprintln!(
            "error: {} corpus document(s) unreadable; skipping end-to-end run",
            report.errors.len()
        );
        print_summary(&report, None);
        return Ok(ExitCode::from(1));
    }

    let config = PipelineConfig {
        threshold_bytes: args.threshold,
        failure_mode: args.fail_mode,
        algorithm: args.algorithm,
        confirm_mode: args.confirm,
    };
    let outcome = experiment::run_end_to_end(&manifest, &plan, &config, &args.out.join("work"))?;

    let json = serde_json::to_string_pretty(&outcome.report)?;
    std::fs::write(args.out.join("e2e_report.json"), json + "\n")?;

    print_summary(&report, Some(&outcome.report));
    if let Some(abort) = &outcome.report.aborted {
        eprintln!(
            "error: end-to-end run aborted at document {}: {}",
            abort.doc_index, abort.message
        );
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn print_summary(report: &ExperimentReport, e2e: Option<&dupband_core::pipeline::StreamReport>) {
    let summary = report.summary();
    print!(
        "docs={} size_preserved={}/{} digest_changed={}/{}",
        summary.docs, summary.size_preserved, summary.docs, summary.digest_changed, summary.docs
    );
    if let Some(report) = e2e {
        let c = report.counts;
        print!(
            " | e2e: documents={} unique={} dup_hash={} dup_size={} unique_unconfirmed={} probes={}",
            c.total(),
            c.unique,
            c.dup_hash,
            c.dup_size,
            c.unique_unconfirmed,
            report.total_probes
        );
    }
    println!();
}

fn print_row_errors(errors: &[RowError]) {
    for err in errors {
        eprintln!("error: {}: {}", err.label, err.message);
    }
}

fn cmd_index_inspect(args: IndexInspectArgs) -> anyhow::Result<ExitCode> {
    let index = DedupIndex::snapshot_load(&args.snapshot, None)
        .with_context(|| format!("loading snapshot '{}'", args.snapshot.display()))?;
    let algorithms: Vec<&str> = index.algorithms().iter().map(|a| a.name()).collect();
    println!("entries={}", index.len());
    println!("next_seq={}", index.next_seq());
    println!("algorithms={}", algorithms.join(","));
    for entry in index.iter() {
        println!(
            "seq={} algo={} digest={} size={} source={} query={}",
            entry.seq,
            entry.digest.algorithm().name(),
            entry.digest.to_hex(),
            entry.size_bytes,
            entry.source_ref,
            entry.query_ref
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn build_plan(ops: &str, seed: u64, rounds: u32) -> anyhow::Result<PerturbationPlan> {
    let operators = PerturbOperator::parse_list(ops)?;
    Ok(PerturbationPlan::new(seed, operators, rounds)?)
}

fn parent_dir(path: &Path) -> PathBuf {
    path.parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."))
        .to_path_buf()
}

fn exit_code(failed: bool) -> ExitCode {
    if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
