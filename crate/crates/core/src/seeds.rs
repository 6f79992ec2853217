//! Deterministic seed derivation for independent random streams.

/// One round of the SplitMix64 output function.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `index` under `base`: `splitmix64(splitmix64(base) ^ index)`.
///
/// Distinct indices give statistically independent seeds, and the result does
/// not depend on the order in which streams are requested.
pub fn mix(base: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base) ^ index)
}
