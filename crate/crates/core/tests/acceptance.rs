//! The acceptance gate: nine numbered checks covering the behaviors this
//! workspace promises, run in order with one scoreboard line each.
//!
//! Run `cargo test --test acceptance -- --nocapture` to watch the lines go
//! by; under a plain `cargo test` the scoreboard surfaces whenever any
//! criterion fails.

mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;
use std::time::Instant;

use dupband_core::experiment::corpus::{materialize_bundled, BUNDLED_DOC_COUNT};
use dupband_core::experiment::{
    build_probe_registry, build_stream, run_end_to_end, run_perturbation_experiment,
    write_csv_reports,
};
use dupband_core::fingerprint::{
    compute_digest, compute_fingerprint, DigestAlgorithm, Fingerprint,
};
use dupband_core::index::DedupIndex;
use dupband_core::perturb::PerturbationPlan;
use dupband_core::pipeline::{
    process_result, process_stream, FailureMode, PipelineConfig, Verdict, DEFAULT_THRESHOLD_BYTES,
};
use dupband_core::sources::{QuerySpec, ResultDocument, SourceName, SourceRegistry};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use support::md5_ref;
use support::oracle::ProbeBehavior;
use support::scripted::ScriptedSource;
use support::trials::{random_trial, run_both};

/// 1. The bundled 16-document study: every default-plan rewrite keeps its
///    byte count and changes its digest, inside a five-second budget.
fn criterion_1_size_preserving_rewrites() -> String {
    let dir = tempfile::tempdir().unwrap();
    let manifest = materialize_bundled(dir.path()).unwrap();

    let started = Instant::now();
    let report = run_perturbation_experiment(
        &manifest,
        &PerturbationPlan::default(),
        DigestAlgorithm::Md5,
    );
    let elapsed = started.elapsed();

    assert!(report.errors.is_empty(), "row errors: {:?}", report.errors);
    let summary = report.summary();
    assert_eq!(summary.docs, BUNDLED_DOC_COUNT);
    assert_eq!(
        summary.size_preserved, BUNDLED_DOC_COUNT,
        "a rewrite moved a byte count"
    );
    assert_eq!(
        summary.digest_changed, BUNDLED_DOC_COUNT,
        "a rewrite failed to change a digest"
    );
    assert!(
        elapsed.as_secs_f64() < 5.0,
        "study took {elapsed:?}, budget is 5 s"
    );
    format!(
        "{}/{} sizes preserved, {}/{} digests changed in {} ms",
        summary.size_preserved,
        summary.docs,
        summary.digest_changed,
        summary.docs,
        elapsed.as_millis()
    )
}

/// 2. Streaming originals then rewrites against confirming file-backed
///    sources: exactly 16 unique + 16 dup_size, and a byte-identical copy
///    appended to the stream adds exactly one dup_hash.
fn criterion_2_end_to_end_counts() -> String {
    let dir = tempfile::tempdir().unwrap();
    let manifest = materialize_bundled(&dir.path().join("corpus")).unwrap();
    let plan = PerturbationPlan::default();

    let outcome = run_end_to_end(
        &manifest,
        &plan,
        &PipelineConfig::default(),
        &dir.path().join("work"),
    )
    .unwrap();
    let counts = outcome.report.counts;
    assert!(outcome.report.aborted.is_none());
    assert_eq!(
        (
            counts.unique,
            counts.dup_hash,
            counts.dup_size,
            counts.unique_unconfirmed
        ),
        (BUNDLED_DOC_COUNT, 0, BUNDLED_DOC_COUNT, 0),
        "unexpected verdict tallies"
    );

    let registry = build_probe_registry(&manifest, &dir.path().join("sources-copy")).unwrap();
    let mut docs = build_stream(&manifest, &plan).unwrap();
    let mut copy = docs[0].clone();
    copy.label.push_str(".copy");
    docs.push(copy);
    let mut index = DedupIndex::new();
    let with_copy = process_stream(&docs, &mut index, &registry, &PipelineConfig::default());
    assert_eq!(
        (
            with_copy.counts.unique,
            with_copy.counts.dup_hash,
            with_copy.counts.dup_size
        ),
        (BUNDLED_DOC_COUNT, 1, BUNDLED_DOC_COUNT),
        "the byte-identical copy must add exactly one dup_hash"
    );
    format!(
        "16 unique + 16 dup_size + 0 dup_hash; appending a verbatim copy adds 1 dup_hash ({} records)",
        with_copy.records.len()
    )
}

/// 3. One hundred randomized replays (2–100 documents, payloads and
///    thresholds up to 64 KiB, scripted probe behavior) decided identically
///    by the pipeline and the brute-force model, within a minute.
fn criterion_3_oracle_agreement() -> String {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x00AC_CE97);
    for trial_no in 0..100 {
        let trial = random_trial(&mut rng, 100, 64 * 1024, 64 * 1024);
        let (pipeline, oracle, pipeline_probes, oracle_probes) = run_both(&trial);
        assert_eq!(pipeline, oracle, "trial {trial_no}: verdicts diverged");
        assert_eq!(
            pipeline_probes, oracle_probes,
            "trial {trial_no}: probe counts diverged"
        );
    }
    let elapsed = started.elapsed();
    assert!(
        elapsed.as_secs_f64() < 60.0,
        "trials took {elapsed:?}, budget is 60 s"
    );
    format!(
        "100/100 randomized trials agree with the model in {:.1} s",
        elapsed.as_secs_f64()
    )
}

/// 4. The band edge is inclusive at exactly the default threshold: a size
///    gap of 51200 bytes is still a duplicate, 51201 is not.
fn criterion_4_threshold_boundary() -> String {
    assert_eq!(DEFAULT_THRESHOLD_BYTES, 51200);

    let decide = |gap: usize| -> Verdict {
        let mut registry = SourceRegistry::new();
        registry.register(Arc::new(ScriptedSource::new(
            "keeper",
            ProbeBehavior::Documents(1),
        )));
        registry.register(Arc::new(ScriptedSource::new(
            "inbound",
            ProbeBehavior::Empty,
        )));
        let mut index = DedupIndex::new();
        index.insert(
            compute_fingerprint(&vec![b'x'; 4096], DigestAlgorithm::Md5),
            SourceName::new("keeper"),
            "stored".into(),
        );
        let doc = ResultDocument {
            payload: vec![b'y'; 4096 + gap],
            source_ref: SourceName::new("inbound"),
            query: QuerySpec::from_id("incoming").unwrap(),
            label: "incoming".into(),
        };
        process_result(&doc, &mut index, &registry, &PipelineConfig::default())
            .unwrap()
            .verdict
    };

    assert_eq!(
        decide(51200),
        Verdict::DuplicateBySize,
        "gap 51200 is inside"
    );
    assert_eq!(decide(51201), Verdict::Unique, "gap 51201 is outside");
    "gap of 51200 → dup_size, 51201 → unique".to_string()
}

/// 5. When a document matches entry A by digest and entry B by size, and
///    both would confirm, the digest tier wins and pins entry A.
fn criterion_5_tier_precedence() -> String {
    let payload = b"federated answer page".to_vec();
    let mut size_twin = payload.clone();
    size_twin[0] ^= 0xFF;

    let b_source = ScriptedSource::new("holder-b", ProbeBehavior::Documents(1));
    let b_calls = b_source.call_counter();
    let mut registry = SourceRegistry::new();
    registry.register(Arc::new(ScriptedSource::new(
        "holder-a",
        ProbeBehavior::Documents(1),
    )));
    registry.register(Arc::new(b_source));
    registry.register(Arc::new(ScriptedSource::new(
        "inbound",
        ProbeBehavior::Empty,
    )));

    let mut index = DedupIndex::new();
    let seq_a = index.insert(
        compute_fingerprint(&payload, DigestAlgorithm::Md5),
        SourceName::new("holder-a"),
        "qa".into(),
    );
    index.insert(
        compute_fingerprint(&size_twin, DigestAlgorithm::Md5),
        SourceName::new("holder-b"),
        "qb".into(),
    );

    let doc = ResultDocument {
        payload,
        source_ref: SourceName::new("inbound"),
        query: QuerySpec::from_id("incoming").unwrap(),
        label: "incoming".into(),
    };
    let decision = process_result(&doc, &mut index, &registry, &PipelineConfig::default()).unwrap();

    assert_eq!(decision.verdict, Verdict::DuplicateByHash);
    assert_eq!(
        decision.matched_entry.as_ref().map(|e| e.seq),
        Some(seq_a),
        "must match the digest-equal entry, not the size twin"
    );
    assert_eq!(
        b_calls.load(std::sync::atomic::Ordering::Relaxed),
        0,
        "the size twin's source must never be probed"
    );
    "digest match beats size match and pins entry A".to_string()
}

/// 6. Confirmation gating: an empty probe answer keeps the document; an
///    unreachable source keeps it under fail-open and discards it under
///    fail-closed.
fn criterion_6_confirmation_gating() -> String {
    let run_case = |behavior: ProbeBehavior, mode: FailureMode| -> (Verdict, usize) {
        let mut registry = SourceRegistry::new();
        registry.register(Arc::new(ScriptedSource::new("holder", behavior)));
        registry.register(Arc::new(ScriptedSource::new(
            "inbound",
            ProbeBehavior::Empty,
        )));
        let mut index = DedupIndex::new();
        index.insert(
            compute_fingerprint(b"stored page bytes", DigestAlgorithm::Md5),
            SourceName::new("holder"),
            "stored".into(),
        );
        let doc = ResultDocument {
            payload: b"fresh result body".to_vec(), // same 17-byte size
            source_ref: SourceName::new("inbound"),
            query: QuerySpec::from_id("incoming").unwrap(),
            label: "incoming".into(),
        };
        let config = PipelineConfig {
            failure_mode: mode,
            ..PipelineConfig::default()
        };
        let decision = process_result(&doc, &mut index, &registry, &config).unwrap();
        (decision.verdict, index.len())
    };

    assert_eq!(
        run_case(ProbeBehavior::Empty, FailureMode::FailOpen),
        (Verdict::UniqueUnconfirmed, 2),
        "an empty answer is a 'no'"
    );
    assert_eq!(
        run_case(ProbeBehavior::Unavailable, FailureMode::FailOpen),
        (Verdict::UniqueUnconfirmed, 2),
        "fail-open keeps the document on an outage"
    );
    assert_eq!(
        run_case(ProbeBehavior::Unavailable, FailureMode::FailClosed),
        (Verdict::DuplicateBySize, 1),
        "fail-closed discards the document on an outage"
    );
    "empty probe keeps; outage keeps under fail-open, discards under fail-closed".to_string()
}

/// 7. Production digests agree with the independently written reference
///    hasher on the empty input, "abc", and 1000 random payloads.
fn criterion_7_digest_reference() -> String {
    let mut checked = 0usize;
    let mut verify = |payload: &[u8]| {
        let production = compute_digest(payload, DigestAlgorithm::Md5).to_hex();
        let reference = md5_ref::md5_hex(payload);
        assert_eq!(
            production,
            reference,
            "digest mismatch on a {}-byte payload",
            payload.len()
        );
        checked += 1;
    };

    verify(b"");
    verify(b"abc");
    let mut rng = ChaCha8Rng::seed_from_u64(1009);
    for _ in 0..1000 {
        let len = rng.random_range(0..=300usize);
        let payload: Vec<u8> = (0..len).map(|_| rng.random()).collect();
        verify(&payload);
    }
    format!("{checked}/{checked} digests agree with the independent reference")
}

/// 8. One thousand randomized index trials: both lookups agree with full
///    scans, and every snapshot round-trips byte-identically.
fn criterion_8_index_integrity() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    for trial in 0..1000 {
        let entry_count = rng.random_range(0..24usize);
        let mut index = DedupIndex::new();
        let mut payloads: Vec<Vec<u8>> = Vec::new();
        for i in 0..entry_count {
            let len = rng.random_range(0..16usize);
            let payload: Vec<u8> = (0..len).map(|_| rng.random()).collect();
            let size = if rng.random_bool(0.1) {
                u64::MAX - rng.random_range(0..3u64)
            } else {
                rng.random_range(0..4096)
            };
            index.insert(
                Fingerprint {
                    digest: compute_digest(&payload, DigestAlgorithm::Md5),
                    size_bytes: size,
                },
                SourceName::new(format!("s{}", i % 3)),
                format!("q{i}").into(),
            );
            payloads.push(payload);
        }

        let probe_payload: Vec<u8> = if !payloads.is_empty() && rng.random_bool(0.5) {
            payloads[rng.random_range(0..payloads.len())].clone()
        } else {
            let len = rng.random_range(0..16usize);
            (0..len).map(|_| rng.random()).collect()
        };
        let digest = compute_digest(&probe_payload, DigestAlgorithm::Md5);
        let fast: Vec<u64> = index
            .find_by_digest(&digest)
            .iter()
            .map(|e| e.seq)
            .collect();
        let scan: Vec<u64> = index
            .iter()
            .filter(|e| e.digest == digest)
            .map(|e| e.seq)
            .collect();
        assert_eq!(fast, scan, "trial {trial}: digest lookup diverged");

        let probe_size = if rng.random_bool(0.1) {
            u64::MAX
        } else {
            rng.random_range(0..4096)
        };
        let threshold = if rng.random_bool(0.1) {
            u64::MAX
        } else {
            rng.random_range(0..4096)
        };
        let fast: Vec<u64> = index
            .find_by_size_band(probe_size, threshold)
            .iter()
            .map(|e| e.seq)
            .collect();
        let scan: Vec<u64> = index
            .iter()
            .filter(|e| e.size_bytes.abs_diff(probe_size) <= threshold)
            .map(|e| e.seq)
            .collect();
        assert_eq!(fast, scan, "trial {trial}: band lookup diverged");

        let bytes = index.snapshot_to_bytes();
        let loaded = DedupIndex::snapshot_from_bytes(&bytes, None).unwrap();
        assert_eq!(
            bytes,
            loaded.snapshot_to_bytes(),
            "trial {trial}: snapshot round-trip not byte-identical"
        );
    }
    "1000/1000 trials: lookups match full scans, snapshots round-trip byte-identically".to_string()
}

/// 9. Re-running the seeded study and the seeded end-to-end stream produces
///    byte-identical CSV and JSON outputs.
fn criterion_9_deterministic_outputs() -> String {
    let render = || -> [Vec<u8>; 4] {
        let dir = tempfile::tempdir().unwrap();
        let manifest = materialize_bundled(&dir.path().join("corpus")).unwrap();
        let plan = PerturbationPlan::default();

        let study = run_perturbation_experiment(&manifest, &plan, DigestAlgorithm::Md5);
        let reports = dir.path().join("reports");
        std::fs::create_dir_all(&reports).unwrap();
        write_csv_reports(&study, &reports).unwrap();

        let outcome = run_end_to_end(
            &manifest,
            &plan,
            &PipelineConfig::default(),
            &dir.path().join("work"),
        )
        .unwrap();
        [
            std::fs::read(reports.join("table1.csv")).unwrap(),
            std::fs::read(reports.join("table2.csv")).unwrap(),
            std::fs::read(reports.join("series.csv")).unwrap(),
            serde_json::to_vec_pretty(&outcome.report).unwrap(),
        ]
    };

    let first = render();
    let second = render();
    for (name, (a, b)) in ["table1.csv", "table2.csv", "series.csv", "report json"]
        .iter()
        .zip(first.iter().zip(second.iter()))
    {
        assert!(!a.is_empty(), "{name} came out empty");
        assert_eq!(a, b, "{name} differs between identical seeded runs");
    }
    "CSV tables, series, and stream report JSON are byte-identical across runs".to_string()
}

fn flatten(message: &str) -> String {
    let mut flat = message
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join(" | ");
    if flat.len() > 220 {
        let mut cut = 220;
        while !flat.is_char_boundary(cut) {
            cut -= 1;
        }
        flat.truncate(cut);
        flat.push('…');
    }
    flat
}

#[test]
fn acceptance_gate() {
    let criteria: Vec<(u32, Box<dyn FnOnce() -> String>)> = vec![
        (1, Box::new(criterion_1_size_preserving_rewrites)),
        (2, Box::new(criterion_2_end_to_end_counts)),
        (3, Box::new(criterion_3_oracle_agreement)),
        (4, Box::new(criterion_4_threshold_boundary)),
        (5, Box::new(criterion_5_tier_precedence)),
        (6, Box::new(criterion_6_confirmation_gating)),
        (7, Box::new(criterion_7_digest_reference)),
        (8, Box::new(criterion_8_index_integrity)),
        (9, Box::new(criterion_9_deterministic_outputs)),
    ];

    let mut failed = Vec::new();
    for (number, body) in criteria {
        match catch_unwind(AssertUnwindSafe(body)) {
            Ok(detail) => println!("criterion {number} PASS: {detail}"),
            Err(panic) => {
                let reason = panic
                    .downcast_ref::<&str>()
                    .map(|s| (*s).to_string())
                    .or_else(|| panic.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "panicked without a message".to_string());
                println!("criterion {number} FAIL: {}", flatten(&reason));
                failed.push(number);
            }
        }
    }

    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
