//! The bundled corpus: sixteen deterministic text documents whose pairwise
//! size gaps all exceed the default size-band threshold.
//!
//! That spacing is load-bearing. When the originals stream through the
//! pipeline first, none of them lands inside another's band, so all sixteen
//! come out `unique` with zero probes; each size-preserved perturbed copy
//! then has exactly one band neighbor — its own original. Keep the gaps
//! above [`crate::pipeline::DEFAULT_THRESHOLD_BYTES`] or the study stops
//! measuring what it says it measures.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{CorpusManifest, ManifestError};

/// Number of documents in the bundled corpus.
pub const BUNDLED_DOC_COUNT: usize = 16;

/// Source name every bundled document claims.
pub const BUNDLED_SOURCE: &str = "primary";

/// Exact byte sizes, ascending; the smallest consecutive gap is 52224.
pub const BUNDLED_SIZES: [usize; BUNDLED_DOC_COUNT] = [
    3_746, 58_982, 114_688, 169_984, 224_256, 276_480, 329_728, 384_512, 440_832, 493_568, 547_328,
    603_136, 655_360, 709_632, 762_880, 818_176,
];

const CORPUS_SEED: u64 = 0x00C0_FFEE;

#[rustfmt::skip]
const WORDS: &[&str] = &[
    "the", "fox", "ant", "bee", "owl", "ram", "cod", "elk", "ivy", "oak",
    "lazy", "gray", "blue", "dark", "tall", "wide", "thin", "bold", "calm", "deep",
    "query", "faded", "solar", "lunar", "amber", "ochre", "slate", "pearl", "quiet", "rapid",
    "result", "branch", "stream", "forest", "meadow", "valley", "canyon", "harbor", "copper", "silver",
    "granite", "horizon", "lantern", "monsoon", "orchard", "pioneer", "quarrel", "saffron",
    "document", "boundary", "filament", "mariners", "overcast", "pressure",
    "duplicate", "threshold", "waterfall", "telescope", "sandstone", "driftwood",
];

/// Builds one document of exactly `target_len` bytes: seeded word salad with
/// sentence capitalization, occasional tabs, and newline-terminated runs.
fn synth_document(doc_index: usize, target_len: usize) -> Vec<u8> {
    let mut rng =
        ChaCha8Rng::seed_from_u64(CORPUS_SEED.wrapping_add(doc_index as u64 * 0x9E37_79B9));
    let mut text = String::with_capacity(target_len + 128);

    while text.len() < target_len {
        let words_in_sentence = rng.random_range(6..14);
        for w in 0..words_in_sentence {
            let word = WORDS[rng.random_range(0..WORDS.len())];
            if w == 0 {
                text.push(word.as_bytes()[0].to_ascii_uppercase() as char);
                text.push_str(&word[1..]);
            } else {
                text.push_str(word);
            }
            if w + 1 < words_in_sentence {
                text.push(if rng.random_bool(0.08) { '\t' } else { ' ' });
            }
        }
        text.push('.');
        text.push(if rng.random_bool(0.2) { '\n' } else { ' ' });
    }

    let mut bytes = text.into_bytes();
    bytes.truncate(target_len);
    bytes
}

/// Writes the sixteen documents plus a `manifest.txt` into `dir` and loads
/// the manifest back through the ordinary loader. Deterministic: two
/// materializations produce byte-identical trees.
pub fn materialize_bundled(dir: &Path) -> Result<CorpusManifest, ManifestError> {
    std::fs::create_dir_all(dir)?;

    let mut manifest_text = String::from("# label  path  query_id  source\n");
    for (i, &size) in BUNDLED_SIZES.iter().enumerate() {
        let label = format!("page-{:02}", i + 1);
        let file = format!("{label}.txt");
        std::fs::write(dir.join(&file), synth_document(i, size))?;
        manifest_text.push_str(&format!(
            "{label}  {file}  q{:02}  {BUNDLED_SOURCE}\n",
            i + 1
        ));
    }

    let manifest_path = dir.join("manifest.txt");
    std::fs::write(&manifest_path, manifest_text)?;
    CorpusManifest::load(&manifest_path)
}

/// The spacing guarantee the corpus is built around; exposed so tests (and
/// skeptical users) can re-check it against the current threshold default.
pub fn min_pairwise_size_gap() -> u64 {
    let mut min_gap = u64::MAX;
    for (i, &a) in BUNDLED_SIZES.iter().enumerate() {
        for &b in &BUNDLED_SIZES[i + 1..] {
            min_gap = min_gap.min(a.abs_diff(b) as u64);
        }
    }
    min_gap
}
