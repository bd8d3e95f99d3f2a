//! Seeded, counter-based random streams.
//!
//! Every random draw in a run comes from a ChaCha8 stream addressed by
//! `(seed, episode, purpose)`. Streams are independent, so adding evaluation
//! rollouts never shifts the training draws.

use rand::SeedableRng;
pub use rand_chacha::ChaCha8Rng;

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Training = 1,
    Evaluation = 2,
    Perturbation = 3,
    Auxiliary = 4,
}

// splitmix64 finalizer
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// The stream for one `(seed, episode, purpose)` triple.
pub fn stream(seed: u64, episode: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed));
    rng.set_stream(mix(episode ^ mix(purpose as u64)));
    rng
}
