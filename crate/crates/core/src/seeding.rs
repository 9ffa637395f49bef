//! Stable seed derivation, independent of platform and std hasher versions.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// One round of the splitmix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// Seed for the stream identified by `base` and the labelled parts.
pub fn derive_seed(base: u64, parts: &[&str]) -> u64 {
    let mut h = splitmix64(base);
    for p in parts {
        // Length prefix keeps ("ab", "c") and ("a", "bc") apart.
        h = splitmix64(h ^ fnv1a(&(p.len() as u64).to_le_bytes()) ^ fnv1a(p.as_bytes()).rotate_left(17));
    }
    h
}
