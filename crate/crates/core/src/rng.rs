//! Seed derivation for reproducible experiments.
//!
//! Every random stream in the crate is a ChaCha8 generator keyed by a seed
//! derived from the experiment's master seed and a fixed purpose tag, so
//! adding a consumer never perturbs the others.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags for derived streams.
pub mod tag {
    pub const DATASET: u64 = 0x6461_7461;
    pub const MODEL_INIT: u64 = 0x696e_6974;
    pub const POOL_INIT: u64 = 0x706f_6f6c;
    pub const SHUFFLE: u64 = 0x7368_7566;
    pub const ACQUIRE: u64 = 0x6163_7175;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes `parts` into a single 64-bit seed.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(splitmix64(master), |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

pub fn stream(master: u64, parts: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, parts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn derived_streams_are_reproducible_and_distinct() {
        let a: u64 = stream(7, &[tag::DATASET]).random();
        let b: u64 = stream(7, &[tag::DATASET]).random();
        let c: u64 = stream(7, &[tag::SHUFFLE]).random();
        let d: u64 = stream(8, &[tag::DATASET]).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }

    #[test]
    fn part_order_matters() {
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
    }
}
