//! Derivation of independent sub-seeds from a root seed and indices.

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes `parts` into one seed; different index tuples give unrelated seeds.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x5EED, |acc, &p| splitmix(acc ^ splitmix(p)))
}
