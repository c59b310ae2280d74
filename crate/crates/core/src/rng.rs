//! Seeded random streams.
//!
//! Every random draw in an experiment comes from a ChaCha stream selected by
//! `(master seed, repetition, tag)`, so the output of one repetition never
//! depends on scheduling or on how many other repetitions ran.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type BssRng = ChaCha8Rng;

const TAG_BITS: u32 = 24;

/// Independent generator for one `(repetition, tag)` cell of a master seed.
pub fn stream(master_seed: u64, repetition: u64, tag: u64) -> BssRng {
    assert!(tag < (1 << TAG_BITS), "stream tag {tag} out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream((repetition << TAG_BITS) | tag);
    rng
}

/// Plain seeded generator, for standalone use of the library.
pub fn seeded(seed: u64) -> BssRng {
    ChaCha8Rng::seed_from_u64(seed)
}
