//! Deterministic seed splitting so every stage draws from its own stream of
//! one root seed.

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for stream `stream` of `root`.
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    mix(mix(root) ^ stream.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Child seed keyed by a stage name.
pub fn stage_seed(root: u64, stage: &str) -> u64 {
    // FNV-1a over the name.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in stage.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    derive_seed(root, h)
}
