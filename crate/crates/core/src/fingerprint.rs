//! Content digests and byte sizes for result documents.
//!
//! A [`Fingerprint`] pairs the digest of a document's raw payload with the
//! payload's exact octet count. Payloads are hashed exactly as received —
//! no trimming, whitespace normalization, or re-encoding — so a formatting
//! change flips the digest even when the byte count stays put, which is
//! precisely the blind spot the size-band tier of the pipeline covers.

use std::fmt;
use std::io;
use std::str::FromStr;

use md5::Digest as _;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

/// Digest algorithms the crate knows how to compute.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DigestAlgorithm {
    #[default]
    Md5,
    Sha256,
}

impl DigestAlgorithm {
    pub const ALL: [DigestAlgorithm; 2] = [DigestAlgorithm::Md5, DigestAlgorithm::Sha256];

    /// Digest length in bytes.
    pub fn digest_len(self) -> usize {
        match self {
            DigestAlgorithm::Md5 => 16,
            DigestAlgorithm::Sha256 => 32,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DigestAlgorithm::Md5 => "md5",
            DigestAlgorithm::Sha256 => "sha256",
        }
    }

    /// Stable one-byte identifier used in index snapshots.
    pub fn wire_id(self) -> u8 {
        match self {
            DigestAlgorithm::Md5 => 1,
            DigestAlgorithm::Sha256 => 2,
        }
    }

    pub fn from_wire_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(DigestAlgorithm::Md5),
            2 => Some(DigestAlgorithm::Sha256),
            _ => None,
        }
    }
}

impl fmt::Display for DigestAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unsupported digest algorithm '{0}'")]
pub struct UnsupportedAlgorithm(pub String);

impl FromStr for DigestAlgorithm {
    type Err = UnsupportedAlgorithm;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "md5" => Ok(DigestAlgorithm::Md5),
            "sha256" | "sha-256" => Ok(DigestAlgorithm::Sha256),
            other => Err(UnsupportedAlgorithm(other.to_owned())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("bad digest string for {algorithm}: {reason}")]
pub struct DigestParseError {
    pub algorithm: DigestAlgorithm,
    pub reason: String,
}

/// A digest value tagged with the algorithm that produced it.
///
/// Two digests compare equal only if both the algorithm and the bytes match,
/// so values from different algorithms can never be confused for one another
/// even when truncated representations collide.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Digest {
    algorithm: DigestAlgorithm,
    bytes: Box<[u8]>,
}

impl Digest {
    /// Builds a digest from raw bytes whose length was already validated.
    pub(crate) fn from_raw(algorithm: DigestAlgorithm, bytes: Box<[u8]>) -> Self {
        debug_assert_eq!(bytes.len(), algorithm.digest_len());
        Self { algorithm, bytes }
    }

    /// Parses a lowercase/uppercase hex string of exactly the algorithm's
    /// digest length.
    pub fn from_hex(algorithm: DigestAlgorithm, hex_str: &str) -> Result<Self, DigestParseError> {
        let bytes = hex::decode(hex_str).map_err(|e| DigestParseError {
            algorithm,
            reason: e.to_string(),
        })?;
        if bytes.len() != algorithm.digest_len() {
            return Err(DigestParseError {
                algorithm,
                reason: format!(
                    "expected {} bytes, got {}",
                    algorithm.digest_len(),
                    bytes.len()
                ),
            });
        }
        Ok(Self::from_raw(algorithm, bytes.into()))
    }

    pub fn algorithm(&self) -> DigestAlgorithm {
        self.algorithm
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    /// Lowercase hex rendering of the digest bytes.
    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }
}

impl fmt::Display for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

impl Serialize for Digest {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("Digest", 2)?;
        st.serialize_field("algorithm", self.algorithm.name())?;
        st.serialize_field("hex", &self.to_hex())?;
        st.end()
    }
}

/// Digest plus exact payload size in bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fingerprint {
    pub digest: Digest,
    pub size_bytes: u64,
}

enum HasherKind {
    Md5(md5::Md5),
    Sha256(sha2::Sha256),
}

/// Incremental fingerprint builder; feed it chunks (or use it as an
/// [`io::Write`] sink) and call [`Fingerprinter::finish`].
///
/// Feeding the same bytes in different chunkings yields the same fingerprint.
pub struct Fingerprinter {
    hasher: HasherKind,
    size_bytes: u64,
}

impl Fingerprinter {
    pub fn new(algorithm: DigestAlgorithm) -> Self {
        let hasher = match algorithm {
            DigestAlgorithm::Md5 => HasherKind::Md5(md5::Md5::new()),
            DigestAlgorithm::Sha256 => HasherKind::Sha256(sha2::Sha256::new()),
        };
        Self {
            hasher,
            size_bytes: 0,
        }
    }

    pub fn update(&mut self, chunk: &[u8]) {
        match &mut self.hasher {
            HasherKind::Md5(h) => h.update(chunk),
            HasherKind::Sha256(h) => h.update(chunk),
        }
        self.size_bytes += chunk.len() as u64;
    }

    pub fn finish(self) -> Fingerprint {
        let (algorithm, bytes): (_, Box<[u8]>) = match self.hasher {
            HasherKind::Md5(h) => (DigestAlgorithm::Md5, h.finalize().as_slice().into()),
            HasherKind::Sha256(h) => (DigestAlgorithm::Sha256, h.finalize().as_slice().into()),
        };
        Fingerprint {
            digest: Digest::from_raw(algorithm, bytes),
            size_bytes: self.size_bytes,
        }
    }
}

impl io::Write for Fingerprinter {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.update(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// One-shot digest of an in-memory payload.
pub fn compute_digest(payload: &[u8], algorithm: DigestAlgorithm) -> Digest {
    compute_fingerprint(payload, algorithm).digest
}

/// One-shot fingerprint of an in-memory payload.
pub fn compute_fingerprint(payload: &[u8], algorithm: DigestAlgorithm) -> Fingerprint {
    let mut fp = Fingerprinter::new(algorithm);
    fp.update(payload);
    fp.finish()
}
