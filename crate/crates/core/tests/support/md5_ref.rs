//! A from-scratch MD5 used only as a cross-check in tests.
//!
//! Deliberately shares no code with the crate under test. The round-constant
//! table is derived from `sin()` at runtime instead of being pasted in, so a
//! transcription error here cannot silently agree with a transcription error
//! in a constant table elsewhere. Correctness of this reference is itself
//! pinned by digests produced with Python's `hashlib` (see the vector test in
//! the acceptance suite).

const INIT: [u32; 4] = [0x6745_2301, 0xefcd_ab89, 0x98ba_dcfe, 0x1032_5476];

const SHIFTS: [[u32; 4]; 4] = [
    [7, 12, 17, 22],
    [5, 9, 14, 20],
    [4, 11, 16, 23],
    [6, 10, 15, 21],
];

fn sine_table() -> [u32; 64] {
    let mut t = [0u32; 64];
    for (i, slot) in t.iter_mut().enumerate() {
        let x = ((i + 1) as f64).sin().abs() * 4_294_967_296.0;
        *slot = x as u64 as u32;
    }
    t
}

fn compress(state: &mut [u32; 4], block: &[u8], table: &[u32; 64]) {
    let mut m = [0u32; 16];
    for (i, word) in m.iter_mut().enumerate() {
        *word = u32::from_le_bytes(block[i * 4..i * 4 + 4].try_into().unwrap());
    }

    let [mut a, mut b, mut c, mut d] = *state;
    for step in 0..64 {
        let round = step / 16;
        let (f, g) = match round {
            0 => ((b & c) | (!b & d), step),
            1 => ((d & b) | (!d & c), (5 * step + 1) % 16),
            2 => (b ^ c ^ d, (3 * step + 5) % 16),
            _ => (c ^ (b | !d), (7 * step) % 16),
        };
        let rotated = a
            .wrapping_add(f)
            .wrapping_add(table[step])
            .wrapping_add(m[g])
            .rotate_left(SHIFTS[round][step % 4]);
        let next_b = b.wrapping_add(rotated);
        (a, b, c, d) = (d, next_b, b, c);
    }

    state[0] = state[0].wrapping_add(a);
    state[1] = state[1].wrapping_add(b);
    state[2] = state[2].wrapping_add(c);
    state[3] = state[3].wrapping_add(d);
}

pub fn md5(data: &[u8]) -> [u8; 16] {
    let table = sine_table();
    let mut state = INIT;

    let bit_len = (data.len() as u64).wrapping_mul(8);
    let mut padded = data.to_vec();
    padded.push(0x80);
    while padded.len() % 64 != 56 {
        padded.push(0);
    }
    padded.extend_from_slice(&bit_len.to_le_bytes());

    for block in padded.chunks_exact(64) {
        compress(&mut state, block, &table);
    }

    let mut out = [0u8; 16];
    for (i, word) in state.iter().enumerate() {
        out[i * 4..i * 4 + 4].copy_from_slice(&word.to_le_bytes());
    }
    out
}

pub fn md5_hex(data: &[u8]) -> String {
    md5(data).iter().map(|b| format!("{b:02x}")).collect()
}
