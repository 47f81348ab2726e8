//! Deterministic seed namespacing.
//!
//! One user-facing seed fans out into independent streams (parameter init,
//! split shuffling, epoch shuffling, random features). The rule is fixed so
//! that artifacts can be reproduced from the master seed alone.

/// SplitMix64 step. Standard finalizer constants.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the domain tag.
fn fnv1a(tag: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Derive the sub-seed for a named stream from the master seed.
pub fn sub_seed(master: u64, domain: &str) -> u64 {
    splitmix64(master ^ fnv1a(domain))
}
