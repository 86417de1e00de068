//! Deterministic seed derivation for sweeps and nested subroutines.

/// SplitMix64 output function. One full avalanche round over `state`.
///
/// This is the documented derivation used everywhere a master seed fans out
/// into per-run or per-subroutine seeds, so sweeps reproduce across
/// implementations: `seed_i = splitmix64(master ^ GOLDEN * (i + 1))` via
/// [`derive_seed`].
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the `index`-th child seed from a master seed.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(1)))
}
