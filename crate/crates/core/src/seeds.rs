//! Deterministic seed derivation for independent random streams.
//!
//! Every random concern (traffic matrix, endpoint sampling, priorities,
//! inter-arrivals, link-level generation, sweep points) draws from its own
//! stream, derived here from the run seed and a label. Streams are
//! decoupled, so changing how one concern consumes randomness never
//! perturbs another, and adding a sweep value never reshuffles the seeds
//! of existing values.
//!
//! The mixing functions are fixed well-known constructions (FNV-1a and
//! SplitMix64) rather than `std`'s `DefaultHasher`, whose output is
//! explicitly not stable across releases.

/// FNV-1a hash of a byte string.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer; a strong avalanche over a single `u64`.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for the stream named `label` under run seed `base`.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    splitmix64(base ^ fnv1a64(label.as_bytes()))
}

/// Seed for one point of a labelled parameter sweep. `value_bits` is a
/// canonical encoding of the swept value (e.g. `f64::to_bits`).
pub fn derive_seed_with(base: u64, label: &str, value_bits: u64) -> u64 {
    splitmix64(base ^ fnv1a64(label.as_bytes()) ^ splitmix64(value_bits))
}
