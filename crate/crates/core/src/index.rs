//! The accepted-results index: digest-equality and size-band lookups over
//! everything the pipeline has let through so far.
//!
//! Entries are keyed by a monotonically increasing insertion sequence and
//! cross-indexed two ways: digest → seqs for the equality tier, and a size
//! tree for the band tier. Both lookups return candidates in ascending seq
//! order, which is the order the pipeline probes them in.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::Serialize;
use thiserror::Error;

use crate::fingerprint::{Digest, DigestAlgorithm, Fingerprint};
use crate::sources::{QueryId, SourceName};

/// One accepted result.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndexEntry {
    pub digest: Digest,
    pub size_bytes: u64,
    pub source_ref: SourceName,
    pub query_ref: QueryId,
    /// Insertion sequence; unique and monotonic within an index lineage.
    pub seq: u64,
}

/// Monotonic counters; readable while lookups hold shared borrows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct IndexStats {
    pub entry_count: usize,
    pub insert_count: u64,
    pub evicted_count: u64,
    pub digest_lookup_count: u64,
    pub size_lookup_count: u64,
}

pub struct DedupIndex {
    entries: BTreeMap<u64, IndexEntry>,
    by_digest: HashMap<Digest, Vec<u64>>,
    by_size: BTreeMap<u64, Vec<u64>>,
    next_seq: u64,
    capacity: Option<usize>,
    insert_count: u64,
    evicted_count: u64,
    digest_lookups: AtomicU64,
    size_lookups: AtomicU64,
}

impl Default for DedupIndex {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for DedupIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DedupIndex")
            .field("entries", &self.entries.len())
            .field("next_seq", &self.next_seq)
            .field("capacity", &self.capacity)
            .finish()
    }
}

impl DedupIndex {
    pub fn new() -> Self {
        Self {
            entries: BTreeMap::new(),
            by_digest: HashMap::new(),
            by_size: BTreeMap::new(),
            next_seq: 0,
            capacity: None,
            insert_count: 0,
            evicted_count: 0,
            digest_lookups: AtomicU64::new(0),
            size_lookups: AtomicU64::new(0),
        }
    }

    /// An index that holds at most `capacity` entries, evicting the oldest
    /// (lowest seq) on overflow. `capacity` must be ≥ 1.
    pub fn with_capacity(capacity: usize) -> Self {
        assert!(capacity >= 1, "capacity must be at least 1");
        Self {
            capacity: Some(capacity),
            ..Self::new()
        }
    }

    /// Accepts a fingerprint into the index and returns its seq.
    pub fn insert(
        &mut self,
        fingerprint: Fingerprint,
        source_ref: SourceName,
        query_ref: QueryId,
    ) -> u64 {
        if let Some(cap) = self.capacity {
            while self.entries.len() >= cap {
                self.evict_oldest();
            }
        }

        let seq = self.next_seq;
        self.next_seq += 1;
        self.insert_count += 1;

        let entry = IndexEntry {
            digest: fingerprint.digest,
            size_bytes: fingerprint.size_bytes,
            source_ref,
            query_ref,
            seq,
        };
        self.by_digest
            .entry(entry.digest.clone())
            .or_default()
            .push(seq);
        self.by_size.entry(entry.size_bytes).or_default().push(seq);
        self.entries.insert(seq, entry);
        seq
    }

    fn evict_oldest(&mut self) {
        let Some((seq, entry)) = self.entries.pop_first() else {
            return;
        };
        self.evicted_count += 1;
        if let Some(seqs) = self.by_digest.get_mut(&entry.digest) {
            seqs.retain(|s| *s != seq);
            if seqs.is_empty() {
                self.by_digest.remove(&entry.digest);
            }
        }
        if let Some(seqs) = self.by_size.get_mut(&entry.size_bytes) {
            seqs.retain(|s| *s != seq);
            if seqs.is_empty() {
                self.by_size.remove(&entry.size_bytes);
            }
        }
    }

    /// Entries whose digest equals `digest`, ascending by seq.
    pub fn find_by_digest(&self, digest: &Digest) -> Vec<&IndexEntry> {
        self.digest_lookups.fetch_add(1, Ordering::Relaxed);
        self.by_digest
            .get(digest)
            .map(|seqs| seqs.iter().map(|s| &self.entries[s]).collect())
            .unwrap_or_default()
    }

    /// Entries with `|size - size_bytes| <= threshold_bytes` (inclusive on
    /// both edges), ascending by seq.
    pub fn find_by_size_band(&self, size_bytes: u64, threshold_bytes: u64) -> Vec<&IndexEntry> {
        self.size_lookups.fetch_add(1, Ordering::Relaxed);
        let lo = size_bytes.saturating_sub(threshold_bytes);
        let hi = size_bytes.saturating_add(threshold_bytes);
        let mut seqs: Vec<u64> = self
            .by_size
            .range(lo..=hi)
            .flat_map(|(_, seqs)| seqs.iter().copied())
            .collect();
        seqs.sort_unstable();
        seqs.iter().map(|s| &self.entries[s]).collect()
    }

    /// All entries, ascending by seq.
    pub fn iter(&self) -> impl Iterator<Item = &IndexEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn capacity(&self) -> Option<usize> {
        self.capacity
    }

    pub fn stats(&self) -> IndexStats {
        IndexStats {
            entry_count: self.entries.len(),
            insert_count: self.insert_count,
            evicted_count: self.evicted_count,
            digest_lookup_count: self.digest_lookups.load(Ordering::Relaxed),
            size_lookup_count: self.size_lookups.load(Ordering::Relaxed),
        }
    }

    /// Distinct digest algorithms present, sorted by wire id.
    pub fn algorithms(&self) -> Vec<DigestAlgorithm> {
        let set: BTreeSet<DigestAlgorithm> = self
            .entries
            .values()
            .map(|e| e.digest.algorithm())
            .collect();
        set.into_iter().collect()
    }
}

// ---------------------------------------------------------------------------
// Snapshots
//
// Binary layout, all integers little-endian:
//
//   magic   "DGIX"                        4 bytes
//   version u16                           currently 1
//   algo registry: u8 count, then per algorithm (u8 wire id, u8 digest len)
//   next_seq u64
//   entry count u64
//   entries, ascending seq:
//     u8 algorithm wire id
//     digest bytes (length per the algorithm)
//     u64 size_bytes
//     u32 source len + bytes (utf-8)
//     u32 query len + bytes (utf-8)
//     u64 seq
//   crc32 (IEEE) over everything above   4 bytes
//
// Load re-derives the lookup maps from the entry list; it never trusts
// derived state from disk.
// ---------------------------------------------------------------------------

const SNAPSHOT_MAGIC: &[u8; 4] = b"DGIX";
const SNAPSHOT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed snapshot at byte {offset}: {reason}")]
    Parse { offset: usize, reason: String },
    #[error("snapshot checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("snapshot contains {found} digests but the index is configured for {configured}")]
    AlgorithmMismatch {
        found: String,
        configured: DigestAlgorithm,
    },
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8], SnapshotError> {
        if self.buf.len() - self.pos < n {
            return Err(SnapshotError::Parse {
                offset: self.pos,
                reason: format!("unexpected end of data while reading {what}"),
            });
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self, what: &str) -> Result<u8, SnapshotError> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16, SnapshotError> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32, SnapshotError> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64, SnapshotError> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }

    fn string(&mut self, what: &str) -> Result<String, SnapshotError> {
        let offset = self.pos;
        let len = self.u32(what)? as usize;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec()).map_err(|e| SnapshotError::Parse {
            offset,
            reason: format!("{what} is not utf-8: {e}"),
        })
    }
}

impl DedupIndex {
    /// Serializes the index to its snapshot byte form. Deterministic: equal
    /// index contents yield equal bytes.
    pub fn snapshot_to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());

        let algorithms = self.algorithms();
        out.push(algorithms.len() as u8);
        for algo in &algorithms {
            out.push(algo.wire_id());
            out.push(algo.digest_len() as u8);
        }

        out.extend_from_slice(&self.next_seq.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());

        for entry in self.entries.values() {
            out.push(entry.digest.algorithm().wire_id());
            out.extend_from_slice(entry.digest.as_bytes());
            out.extend_from_slice(&entry.size_bytes.to_le_bytes());
            let source = entry.source_ref.as_str().as_bytes();
            out.extend_from_slice(&(source.len() as u32).to_le_bytes());
            out.extend_from_slice(source);
            let query = entry.query_ref.as_str().as_bytes();
            out.extend_from_slice(&(query.len() as u32).to_le_bytes());
            out.extend_from_slice(query);
            out.extend_from_slice(&entry.seq.to_le_bytes());
        }

        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    /// Parses a snapshot. `configured` is the algorithm the caller intends to
    /// run with; a snapshot holding digests of any other algorithm is
    /// rejected. Pass `None` to accept whatever the snapshot holds (used by
    /// inspection tooling).
    ///
    /// On any error the index is simply not produced — there is no partial
    /// state to observe.
    pub fn snapshot_from_bytes(
        bytes: &[u8],
        configured: Option<DigestAlgorithm>,
    ) -> Result<Self, SnapshotError> {
        let mut r = Reader { buf: bytes, pos: 0 };

        let magic = r.take(4, "magic")?;
        if magic != SNAPSHOT_MAGIC {
            return Err(SnapshotError::Parse {
                offset: 0,
                reason: format!("bad magic {magic:02x?}, expected {SNAPSHOT_MAGIC:02x?}"),
            });
        }
        let version = r.u16("version")?;
        if version != SNAPSHOT_VERSION {
            return Err(SnapshotError::Parse {
                offset: 4,
                reason: format!("unsupported version {version} (supported: {SNAPSHOT_VERSION})"),
            });
        }

        let algo_count = r.u8("algorithm count")?;
        let mut registry: Vec<DigestAlgorithm> = Vec::with_capacity(algo_count as usize);
        for _ in 0..algo_count {
            let offset = r.pos;
            let id = r.u8("algorithm id")?;
            let len = r.u8("algorithm digest length")?;
            let algo = DigestAlgorithm::from_wire_id(id).ok_or_else(|| SnapshotError::Parse {
                offset,
                reason: format!("unknown algorithm id {id}"),
            })?;
            if len as usize != algo.digest_len() {
                return Err(SnapshotError::Parse {
                    offset,
                    reason: format!(
                        "algorithm {algo} declares digest length {len}, expected {}",
                        algo.digest_len()
                    ),
                });
            }
            registry.push(algo);
        }

        if let Some(configured) = configured {
            if registry.iter().any(|a| *a != configured) {
                let found = registry
                    .iter()
                    .map(|a| a.name())
                    .collect::<Vec<_>>()
                    .join("+");
                return Err(SnapshotError::AlgorithmMismatch { found, configured });
            }
        }

        let next_seq = r.u64("next_seq")?;
        let entry_count = r.u64("entry count")?;

        let mut index = DedupIndex::new();
        let mut last_seq: Option<u64> = None;
        for i in 0..entry_count {
            let offset = r.pos;
            let id = r.u8("entry algorithm id")?;
            let algo = DigestAlgorithm::from_wire_id(id)
                .filter(|a| registry.contains(a))
                .ok_or_else(|| SnapshotError::Parse {
                    offset,
                    reason: format!("entry {i} uses algorithm id {id} not in the registry"),
                })?;
            let digest_bytes = r.take(algo.digest_len(), "digest")?;
            let digest = Digest::from_raw(algo, digest_bytes.into());
            let size_bytes = r.u64("size")?;
            let source_ref = SourceName::new(r.string("source ref")?);
            let query_ref: QueryId = r.string("query ref")?.into();
            let seq_offset = r.pos;
            let seq = r.u64("seq")?;

            if last_seq.is_some_and(|prev| seq <= prev) {
                return Err(SnapshotError::Parse {
                    offset: seq_offset,
                    reason: format!("entry seqs not strictly increasing at entry {i}"),
                });
            }
            if seq >= next_seq {
                return Err(SnapshotError::Parse {
                    offset: seq_offset,
                    reason: format!("entry seq {seq} >= next_seq {next_seq}"),
                });
            }
            last_seq = Some(seq);

            let entry = IndexEntry {
                digest,
                size_bytes,
                source_ref,
                query_ref,
                seq,
            };
            index
                .by_digest
                .entry(entry.digest.clone())
                .or_default()
                .push(seq);
            index.by_size.entry(entry.size_bytes).or_default().push(seq);
            index.entries.insert(seq, entry);
        }

        let crc_offset = r.pos;
        let stored = r.u32("checksum")?;
        if r.pos != bytes.len() {
            return Err(SnapshotError::Parse {
                offset: r.pos,
                reason: format!("{} trailing bytes after checksum", bytes.len() - r.pos),
            });
        }
        let computed = crc32fast::hash(&bytes[..crc_offset]);
        if stored != computed {
            return Err(SnapshotError::ChecksumMismatch { stored, computed });
        }

        index.next_seq = next_seq;
        index.insert_count = entry_count;
        Ok(index)
    }

    pub fn snapshot_save(&self, path: &Path) -> Result<(), SnapshotError> {
        std::fs::write(path, self.snapshot_to_bytes())?;
        Ok(())
    }

    pub fn snapshot_load(
        path: &Path,
        configured: Option<DigestAlgorithm>,
    ) -> Result<Self, SnapshotError> {
        let bytes = std::fs::read(path)?;
        Self::snapshot_from_bytes(&bytes, configured)
    }
}
