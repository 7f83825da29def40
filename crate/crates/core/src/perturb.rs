//! Size-preserving payload mutations.
//!
//! Every operator here changes *what the bytes are* without changing *how
//! many there are* — the point is to manufacture documents that dodge digest
//! comparison while staying inside a size band. Byte length is preserved by
//! construction: words only trade places with words of equal byte length,
//! and the other operators rewrite bytes strictly in place.
//!
//! All operators are deterministic in their seed, and a plan derives an
//! independent seed per (round, operator) slot, so reordering or repeating
//! operators never silently reuses a random stream.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::sources::ResultDocument;

/// Seed used when nobody cares to pick one.
pub const DEFAULT_PLAN_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PerturbOperator {
    /// Permute words within equal-byte-length classes.
    WordShuffle,
    /// Trade spaces for tabs (and back) at seeded positions.
    WhitespaceSwap,
    /// Flip ASCII letter case at seeded positions; at least one flip is
    /// forced whenever the payload contains any ASCII letter.
    CaseToggle,
}

impl PerturbOperator {
    pub const ALL: [PerturbOperator; 3] = [
        PerturbOperator::WordShuffle,
        PerturbOperator::WhitespaceSwap,
        PerturbOperator::CaseToggle,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PerturbOperator::WordShuffle => "wordshuffle",
            PerturbOperator::WhitespaceSwap => "wsswap",
            PerturbOperator::CaseToggle => "case",
        }
    }

    fn apply(self, input: &[u8], seed: u64) -> Vec<u8> {
        match self {
            PerturbOperator::WordShuffle => shuffle_word_order(input, seed),
            PerturbOperator::WhitespaceSwap => swap_whitespace(input, seed),
            PerturbOperator::CaseToggle => toggle_case(input, seed),
        }
    }

    /// Parses a comma-separated operator list, e.g. `wordshuffle,case`.
    pub fn parse_list(s: &str) -> Result<Vec<PerturbOperator>, UnknownOperator> {
        s.split(',').map(|part| part.trim().parse()).collect()
    }
}

impl fmt::Display for PerturbOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown perturbation operator '{0}' (expected wordshuffle, wsswap, or case)")]
pub struct UnknownOperator(pub String);

impl FromStr for PerturbOperator {
    type Err = UnknownOperator;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wordshuffle" => Ok(PerturbOperator::WordShuffle),
            "wsswap" => Ok(PerturbOperator::WhitespaceSwap),
            "case" => Ok(PerturbOperator::CaseToggle),
            other => Err(UnknownOperator(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InvalidPlan {
    #[error("a perturbation plan needs at least one operator")]
    NoOperators,
    #[error("a perturbation plan needs at least one round")]
    ZeroRounds,
}

/// A seeded sequence of operators applied for a number of rounds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerturbationPlan {
    seed: u64,
    operators: Vec<PerturbOperator>,
    rounds: u32,
}

impl PerturbationPlan {
    pub fn new(
        seed: u64,
        operators: Vec<PerturbOperator>,
        rounds: u32,
    ) -> Result<Self, InvalidPlan> {
        if operators.is_empty() {
            return Err(InvalidPlan::NoOperators);
        }
        if rounds == 0 {
            return Err(InvalidPlan::ZeroRounds);
        }
        Ok(Self {
            seed,
            operators,
            rounds,
        })
    }

    /// All three operators, one round.
    pub fn default_with_seed(seed: u64) -> Self {
        Self {
            seed,
            operators: PerturbOperator::ALL.to_vec(),
            rounds: 1,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn operators(&self) -> &[PerturbOperator] {
        &self.operators
    }

    pub fn rounds(&self) -> u32 {
        self.rounds
    }
}

impl Default for PerturbationPlan {
    fn default() -> Self {
        Self::default_with_seed(DEFAULT_PLAN_SEED)
    }
}

/// What a plan did to one payload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PerturbOutcome {
    pub payload: Vec<u8>,
    /// Whether any byte actually differs from the input — verified by
    /// comparison, never assumed from the operator list.
    pub changed: bool,
    /// Human-readable notes, one per applied operator plus oddities
    /// (too few words to shuffle, nothing changed at all, …).
    pub log: Vec<String>,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent seed for one (round, operator) slot of a plan.
fn slot_seed(base: u64, round: u32, op_index: u32) -> u64 {
    splitmix64(base ^ splitmix64(((round as u64) << 32) | op_index as u64))
}

/// Maximal runs of non-whitespace bytes (ASCII whitespace delimits).
fn word_ranges(input: &[u8]) -> Vec<Range<usize>> {
    let mut ranges = Vec::new();
    let mut start = None;
    for (i, b) in input.iter().enumerate() {
        if b.is_ascii_whitespace() {
            if let Some(s) = start.take() {
                ranges.push(s..i);
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        ranges.push(s..input.len());
    }
    ranges
}

/// Permutes words within equal-byte-length classes, leaving all whitespace
/// (and therefore the total byte length) untouched.
///
/// Guaranteed to change the payload whenever some length class contains two
/// distinct words; classes whose words are all identical cannot produce a
/// visible change, and inputs with fewer than two words come back verbatim.
pub fn shuffle_word_order(input: &[u8], seed: u64) -> Vec<u8> {
    let ranges = word_ranges(input);
    if ranges.len() < 2 {
        return input.to_vec();
    }

    // Group word indices by byte length; BTreeMap so iteration order (and
    // thus RNG consumption) is stable.
    let mut by_len: std::collections::BTreeMap<usize, Vec<usize>> =
        std::collections::BTreeMap::new();
    for (i, range) in ranges.iter().enumerate() {
        by_len.entry(range.len()).or_default().push(i);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut output = input.to_vec();
    for indices in by_len.values() {
        if indices.len() < 2 {
            continue;
        }
        let originals: Vec<&[u8]> = indices.iter().map(|&i| &input[ranges[i].clone()]).collect();
        let mut shuffled = originals.clone();
        shuffled.shuffle(&mut rng);
        if shuffled == originals && originals.windows(2).any(|w| w[0] != w[1]) {
            // Identity permutation on a class that could visibly change:
            // rotating a non-constant sequence always moves something.
            shuffled.rotate_right(1);
        }
        for (&word_idx, new_word) in indices.iter().zip(shuffled) {
            output[ranges[word_idx].clone()].copy_from_slice(new_word);
        }
    }
    output
}

/// Swaps spaces and tabs at seeded positions; every other byte stays put.
pub fn swap_whitespace(input: &[u8], seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut output = input.to_vec();
    for byte in output.iter_mut() {
        if (*byte == b' ' || *byte == b'\t') && rng.random_bool(0.5) {
            *byte = if *byte == b' ' { b'\t' } else { b' ' };
        }
    }
    output
}

/// Flips ASCII letter case at seeded positions. If the coin flips all land
/// on "leave it", one seeded position is flipped anyway, so any payload with
/// a letter is guaranteed to change.
pub fn toggle_case(input: &[u8], seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut output = input.to_vec();
    let mut letters = Vec::new();
    let mut flipped = 0usize;
    for (i, byte) in output.iter_mut().enumerate() {
        if byte.is_ascii_alphabetic() {
            letters.push(i);
            if rng.random_bool(0.5) {
                *byte ^= 0x20;
                flipped += 1;
            }
        }
    }
    if flipped == 0 && !letters.is_empty() {
        let pick = letters[rng.random_range(0..letters.len())];
        output[pick] ^= 0x20;
    }
    output
}

/// Runs every operator of `plan` for every round, in order.
pub fn apply_plan(input: &[u8], plan: &PerturbationPlan) -> PerturbOutcome {
    let mut current = input.to_vec();
    let mut log = Vec::new();

    for round in 0..plan.rounds {
        for (op_index, op) in plan.operators.iter().enumerate() {
            let seed = slot_seed(plan.seed, round, op_index as u32);
            let next = op.apply(&current, seed);
            assert_eq!(
                next.len(),
                current.len(),
                "operator {op} broke size preservation"
            );
            let delta = next
                .iter()
                .zip(current.iter())
                .filter(|(a, b)| a != b)
                .count();
            let mut note = format!("round {}: {op}: {delta} bytes changed", round + 1);
            if *op == PerturbOperator::WordShuffle && word_ranges(&current).len() < 2 {
                note.push_str(" (fewer than 2 words)");
            }
            log.push(note);
            current = next;
        }
    }

    let changed = current != input;
    if !changed {
        log.push("no-op: plan left the payload byte-identical".into());
    }
    PerturbOutcome {
        payload: current,
        changed,
        log,
    }
}

/// A document rewritten by a plan; source, query, and label carry over.
#[derive(Debug, Clone)]
pub struct PerturbedDocument {
    pub document: ResultDocument,
    pub changed: bool,
    pub log: Vec<String>,
}

pub fn perturb_document(doc: &ResultDocument, plan: &PerturbationPlan) -> PerturbedDocument {
    let outcome = apply_plan(&doc.payload, plan);
    PerturbedDocument {
        document: ResultDocument {
            payload: outcome.payload,
            ..doc.clone()
        },
        changed: outcome.changed,
        log: outcome.log,
    }
}
