//! Deterministic seed derivation.
//!
//! Per-sample and per-fold RNG streams are derived from a root seed with a
//! splitmix64 mix rather than `std`'s hasher, whose keys are not stable
//! across processes. Identical inputs therefore produce identical streams
//! in every run, which the audit pipeline relies on for byte-identical
//! reports.

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from a root seed and a list of stream labels.
pub fn derive(root: u64, labels: &[u64]) -> u64 {
    let mut state = splitmix64(root);
    for &label in labels {
        state = splitmix64(state ^ splitmix64(label));
    }
    state
}

/// Stable numeric label for a string (FNV-1a), for mixing names into seeds.
pub fn label(name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
