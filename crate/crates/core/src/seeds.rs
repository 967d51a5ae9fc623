//! Derived RNG streams, so parallel work never depends on scheduling order.

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the stream identified by `parts` under a root `seed`.
pub fn stream_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(mix64(seed ^ 0x6A09_E667_F3BC_C908), |acc, &p| {
        mix64(acc.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(mix64(p)))
    })
}

/// Seed derived from a string id, e.g. an elimination id.
pub fn id_seed(seed: u64, id: &str) -> u64 {
    let parts: Vec<u64> = id.bytes().map(u64::from).collect();
    stream_seed(seed, &[stream_seed(parts.len() as u64, &parts)])
}
