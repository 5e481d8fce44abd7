use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Independent generator for `stream` under a master `seed`.
///
/// Streams let parallel work items (trees, folds, permutations) draw from
/// disjoint sequences without depending on scheduling order.
pub fn stream(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives a child seed, for handing to nested components that take a plain seed.
pub fn derive_seed(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer over the combined input
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
