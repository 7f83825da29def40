//! Shared fixtures for the integration tests. Each test target pulls in the
//! pieces it needs, so the unused-code lint is silenced wholesale.
#![allow(dead_code)]

pub mod md5_ref;
pub mod oracle;
pub mod scripted;
pub mod trials;

/// Digests frozen from Python 3 `hashlib.md5` — an implementation unrelated
/// to both the production hasher and the reference one above.
pub const HASHLIB_MD5_VECTORS: &[(&[u8], &str)] = &[
    (b"", "d41d8cd98f00b204e9800998ecf8427e"),
    (b"a", "0cc175b9c0f1b6a831c399e269772661"),
    (b"abc", "900150983cd24fb0d6963f7d28e17f72"),
    (b"message digest", "f96b697d7cb7938d525a2f31aaf161d0"),
    (
        b"abcdefghijklmnopqrstuvwxyz",
        "c3fcd3d76192e4007dfb496cca67e13b",
    ),
    (
        b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789",
        "d174ab98d277d9f5a5611c2c9f419d9f",
    ),
    (
        b"12345678901234567890123456789012345678901234567890123456789012345678901234567890",
        "57edf4a22be3c955ac49da2e2107b67a",
    ),
    (b"hello world", "5eb63bbbe01eeed093cb22bb8f5acdc3"),
];

/// Frozen digests of the byte pattern `(i*7 + 3) % 256` at lengths straddling
/// the MD5 block and padding boundaries (also from Python `hashlib`).
pub const HASHLIB_PATTERN_VECTORS: &[(usize, &str)] = &[
    (1, "8666683506aacd900bbd5a74ac4edf68"),
    (55, "52c0e574e1198de5fe3f8f11440dcb1b"),
    (56, "46c9907fc908ee68b1e7b8e71286a518"),
    (57, "1c805dd236c35cab25fcb1bc73802c51"),
    (63, "a62f6d59e837867693f042f5b8f5a236"),
    (64, "7160b8fb5e9e4023d549c3971fbaeead"),
    (65, "70bd662e7aefbda85a0f7244167b7897"),
    (119, "e84905d4214f4d1ca56c2cdcc152b143"),
    (120, "e3eb5a6c8669ea01a8c185b8abc8a5dc"),
    (128, "10b2da1a82f16d99a81a7203fe9f02cb"),
    (1000, "10046f077f2082ac19676b8079f1cb1a"),
];

pub fn pattern_bytes(len: usize) -> Vec<u8> {
    (0..len).map(|i| ((i * 7 + 3) % 256) as u8).collect()
}
