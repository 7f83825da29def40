//! Randomized replay trials shared by the oracle-equivalence suite and the
//! acceptance gate: one generator produces a document stream plus a complete
//! probe script, and [`run_both`] plays it through the production pipeline
//! and the brute-force model side by side.

use std::collections::BTreeMap;
use std::sync::Arc;

use dupband_core::index::DedupIndex;
use dupband_core::pipeline::{process_stream, FailureMode, PipelineConfig, Verdict};
use dupband_core::sources::{QuerySpec, ResultDocument, SourceName, SourceRegistry};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::oracle::{run_oracle, OracleConfig, OracleDoc, ProbeBehavior};
use super::scripted::ScriptedSource;

pub const SOURCE_POOL: [&str; 3] = ["alpha", "beta", "gamma"];
pub const QUERY_POOL: [&str; 6] = ["q0", "q1", "q2", "q3", "q4", "q5"];

/// One self-contained replay: a document stream plus the complete probe
/// script keyed by (candidate source, incoming query id).
pub struct Trial {
    pub docs: Vec<OracleDoc>,
    pub behaviors: BTreeMap<(String, String), ProbeBehavior>,
    pub threshold: u64,
    pub fail_closed: bool,
}

pub fn random_behavior(rng: &mut ChaCha8Rng) -> ProbeBehavior {
    match rng.random_range(0..10u32) {
        0..=4 => ProbeBehavior::Documents(rng.random_range(1..4)),
        5..=7 => ProbeBehavior::Empty,
        _ => ProbeBehavior::Unavailable,
    }
}

/// Draws payloads from a small pool (with occasional one-byte nudges) so that
/// digest-equal repeats and digest-unequal size twins actually occur instead
/// of living in the tails of the distribution.
pub fn random_trial(
    rng: &mut ChaCha8Rng,
    max_docs: usize,
    max_len: usize,
    max_threshold: u64,
) -> Trial {
    let pool_len = rng.random_range(1..=6usize);
    let pool: Vec<Vec<u8>> = (0..pool_len)
        .map(|_| {
            let len = rng.random_range(0..=max_len);
            (0..len).map(|_| rng.random::<u8>()).collect()
        })
        .collect();

    let doc_count = rng.random_range(2..=max_docs);
    let docs = (0..doc_count)
        .map(|_| {
            let mut payload = pool[rng.random_range(0..pool.len())].clone();
            if !payload.is_empty() && rng.random_bool(0.4) {
                let at = rng.random_range(0..payload.len());
                payload[at] = payload[at].wrapping_add(1);
            }
            OracleDoc {
                payload,
                source: SOURCE_POOL[rng.random_range(0..SOURCE_POOL.len())].to_string(),
                query_id: QUERY_POOL[rng.random_range(0..QUERY_POOL.len())].to_string(),
            }
        })
        .collect();

    // Script every (source, query) pair up front; neither side ever falls
    // back to a default, so the two replays cannot drift apart.
    let mut behaviors = BTreeMap::new();
    for source in SOURCE_POOL {
        for query in QUERY_POOL {
            behaviors.insert(
                (source.to_string(), query.to_string()),
                random_behavior(rng),
            );
        }
    }

    Trial {
        docs,
        behaviors,
        threshold: rng.random_range(0..=max_threshold),
        fail_closed: rng.random_bool(0.5),
    }
}

pub fn registry_for(trial: &Trial) -> SourceRegistry {
    let mut registry = SourceRegistry::new();
    for source in SOURCE_POOL {
        let mut scripted = ScriptedSource::new(source, ProbeBehavior::Empty);
        for ((s, q), behavior) in &trial.behaviors {
            if s == source {
                scripted = scripted.on_query(q.clone(), *behavior);
            }
        }
        registry.register(Arc::new(scripted));
    }
    registry
}

pub fn pipeline_docs(trial: &Trial) -> Vec<ResultDocument> {
    trial
        .docs
        .iter()
        .enumerate()
        .map(|(i, d)| ResultDocument {
            payload: d.payload.clone(),
            source_ref: SourceName::new(d.source.as_str()),
            query: QuerySpec::from_id(d.query_id.as_str()).expect("pool ids are non-empty"),
            label: format!("doc-{i:03}"),
        })
        .collect()
}

pub fn config_for(trial: &Trial) -> PipelineConfig {
    PipelineConfig {
        threshold_bytes: trial.threshold,
        failure_mode: if trial.fail_closed {
            FailureMode::FailClosed
        } else {
            FailureMode::FailOpen
        },
        ..PipelineConfig::default()
    }
}

/// Runs the trial through the production pipeline and the model, returning
/// (pipeline verdicts, oracle verdicts, pipeline probes, oracle probes).
pub fn run_both(trial: &Trial) -> (Vec<Verdict>, Vec<Verdict>, usize, usize) {
    let registry = registry_for(trial);
    let docs = pipeline_docs(trial);
    let mut index = DedupIndex::new();
    let report = process_stream(&docs, &mut index, &registry, &config_for(trial));
    assert!(report.aborted.is_none(), "all trial sources are registered");
    let pipeline_verdicts: Vec<Verdict> =
        report.records.iter().map(|r| r.decision.verdict).collect();

    let mut oracle_probes = 0usize;
    let oracle_verdicts = run_oracle(
        &trial.docs,
        &OracleConfig {
            threshold: trial.threshold,
            fail_closed: trial.fail_closed,
        },
        &mut |source, query| {
            oracle_probes += 1;
            trial.behaviors[&(source.to_string(), query.to_string())]
        },
    );

    (
        pipeline_verdicts,
        oracle_verdicts,
        report.total_probes,
        oracle_probes,
    )
}
