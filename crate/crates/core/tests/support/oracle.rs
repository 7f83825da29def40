//! Brute-force model of the dedup decision procedure.
//!
//! Works directly on payload bytes (no digests, no index structures): the
//! accepted set is a plain Vec scanned pairwise, the hash tier is byte
//! equality, the size tier is `|len(a) - len(b)| <= threshold` over raw
//! lengths. Probe behavior is injected as a closure keyed by
//! (candidate source, incoming query id) so the same script can drive both
//! this model and the real pipeline.

use dupband_core::pipeline::Verdict;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbeBehavior {
    /// The source answers with this many matching documents.
    Documents(usize),
    /// The source answers, but with nothing.
    Empty,
    /// The source cannot be reached.
    Unavailable,
}

#[derive(Debug, Clone)]
pub struct OracleDoc {
    pub payload: Vec<u8>,
    pub source: String,
    pub query_id: String,
}

pub struct OracleConfig {
    pub threshold: u64,
    pub fail_closed: bool,
}

/// Replays `docs` in order and returns one verdict per document.
pub fn run_oracle(
    docs: &[OracleDoc],
    config: &OracleConfig,
    probe: &mut dyn FnMut(&str, &str) -> ProbeBehavior,
) -> Vec<Verdict> {
    let mut accepted: Vec<OracleDoc> = Vec::new();
    let mut verdicts = Vec::with_capacity(docs.len());

    for doc in docs {
        let mut verdict = None;
        let mut probed = false;

        let mut confirms = |source: &str, query_id: &str, probed: &mut bool| {
            *probed = true;
            match probe(source, query_id) {
                ProbeBehavior::Documents(n) => n > 0,
                ProbeBehavior::Empty => false,
                ProbeBehavior::Unavailable => config.fail_closed,
            }
        };

        for candidate in accepted.iter().filter(|c| c.payload == doc.payload) {
            if confirms(&candidate.source, &doc.query_id, &mut probed) {
                verdict = Some(Verdict::DuplicateByHash);
                break;
            }
        }

        if verdict.is_none() {
            let near = accepted.iter().filter(|c| {
                c.payload != doc.payload
                    && (c.payload.len().abs_diff(doc.payload.len()) as u64) <= config.threshold
            });
            for candidate in near {
                if confirms(&candidate.source, &doc.query_id, &mut probed) {
                    verdict = Some(Verdict::DuplicateBySize);
                    break;
                }
            }
        }

        let verdict = verdict.unwrap_or(if probed {
            Verdict::UniqueUnconfirmed
        } else {
            Verdict::Unique
        });
        if !verdict.is_duplicate() {
            accepted.push(doc.clone());
        }
        verdicts.push(verdict);
    }

    verdicts
}
