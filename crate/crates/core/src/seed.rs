//! Seed derivation.
//!
//! Every random stream in a run is seeded with `derive_seed(run_seed, tag)`,
//! where the tag names the stage (`"sample/<source>"`, `"init"`,
//! `"shuffle"`, `"dropout"`, ...). A stage can therefore be rerun on its own
//! and still draw exactly the numbers it drew inside a full run.

/// FNV-1a hash of the tag mixed into the base seed with a SplitMix64
/// finaliser.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(base ^ h)
}

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
