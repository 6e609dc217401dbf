//! Deterministic seed derivation.
//!
//! One user-facing seed governs every stochastic step. Sub-streams (bootstrap
//! of a particular statistic, per-group gap intervals, posterior draws, ...)
//! derive their own seed from the base seed and a stable text label, so adding
//! or reordering analyses never perturbs the streams of existing ones.

/// Derives a child seed from `base` and a stable `label`.
///
/// The label is hashed with FNV-1a and the combination is dispersed through
/// a SplitMix64 finalizer. Both steps are fixed here rather than borrowed
/// from `std` so the mapping can never change underneath serialized reports.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    splitmix64(base ^ fnv1a64(label.as_bytes()))
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x100_0000_01b3);
    }
    hash
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
