//! Seed derivation.
//!
//! Every random choice in the workbench comes from a ChaCha8 stream. A master
//! seed expands into per-purpose subseeds as follows: seed ChaCha8 with the
//! master via `seed_from_u64`, select stream `(purpose << 32) | index`, and
//! take the first `u64`. `index` distinguishes repetitions of the same
//! purpose (for example the split of repetition `r`).

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random-number consumers, each with its own derived stream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Split = 1,
    CnnInit = 2,
    CnnShuffle = 3,
    GbdtBagging = 4,
    GbdtFeatures = 5,
    Verify = 6,
    Subsample = 7,
}

pub fn derive_seed(master: u64, purpose: Purpose, index: u32) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((purpose as u64) << 32) | index as u64);
    rng.next_u64()
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
