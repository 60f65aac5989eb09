//! Stable seed derivation. Every random stream in a run is derived from the
//! root seed and the identity of its consumer, so results do not depend on
//! thread scheduling.

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for the stream labelled `tags` under `root`.
pub fn derive_seed(root: u64, tags: &[u64]) -> u64 {
    let mut h = splitmix64(root);
    h = splitmix64(h ^ tags.len() as u64);
    for &t in tags {
        h = splitmix64(h ^ splitmix64(t));
    }
    h
}

// Stream labels kept distinct from node path elements.
pub const TAG_INIT: u64 = 0xA11C_E000_0000_0001;
pub const TAG_EPOCH: u64 = 0xA11C_E000_0000_0002;
pub const TAG_SPLIT: u64 = 0xA11C_E000_0000_0003;
pub const TAG_DATA: u64 = 0xA11C_E000_0000_0004;
