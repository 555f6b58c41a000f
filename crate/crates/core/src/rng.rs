//! Seed derivation.
//!
//! Every random draw in the crate comes from a [`ChaCha8Rng`] built from an
//! explicit 64-bit seed. Independent sub-streams (per replicate, per fold,
//! per test point) are obtained with [`derive`], which mixes a parent seed
//! with a tag, so results never depend on the order in which work is
//! scheduled.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// One round of the splitmix64 finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `tag` under `seed`.
pub fn derive(seed: u64, tag: u64) -> u64 {
    mix(seed ^ mix(tag.wrapping_mul(GOLDEN).wrapping_add(0x632b_e59b_d9b4_e019)))
}

/// Child seed for a path of tags, e.g. `(replicate, purpose)`.
pub fn derive_path(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(seed, |s, &t| derive(s, t))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// One standard normal draw.
pub fn normal<R: rand::Rng + ?Sized>(r: &mut R) -> f64 {
    use rand_distr::Distribution;
    rand_distr::StandardNormal.sample(r)
}

/// Order-sensitive hash over a stream of 64-bit words (FNV-1a over words,
/// finished with [`mix`]).
pub fn hash_words<I: IntoIterator<Item = u64>>(words: I) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for w in words {
        h ^= w;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    mix(h)
}

/// Tags used to separate the purposes of derived streams.
pub mod tag {
    pub const SPLIT: u64 = 1;
    pub const FOLDS_INLIER: u64 = 2;
    pub const FOLDS_OUTLIER: u64 = 3;
    pub const DATA: u64 = 4;
    pub const TEST: u64 = 5;
    pub const PRUNE: u64 = 6;
    pub const MODEL: u64 = 7;
    pub const CENTERS: u64 = 8;
    pub const JITTER: u64 = 9;
}
