//! Seed derivation.
//!
//! Every random component receives its own seed derived from one master seed
//! and a stable tag, so results do not depend on the order or thread in which
//! components run.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// SplitMix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a textual tag.
pub fn derive(master: u64, tag: &str) -> u64 {
    let mut h = FNV_OFFSET;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    mix(master ^ mix(h))
}

/// Derives a child seed from `master` and an index (fold, repeat, instance).
pub fn derive_index(master: u64, index: u64) -> u64 {
    mix(master ^ mix(index.wrapping_add(0x5851_f42d_4c95_7f2d)))
}
