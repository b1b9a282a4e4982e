//! Order-independent random streams.
//!
//! Every random draw is taken from a ChaCha8 stream whose seed is a
//! SplitMix64 hash of the master seed and a tuple of tags identifying the
//! trial and purpose. Results therefore do not depend on how trials are
//! scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for; keeps phase and readout draws independent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Phases = 1,
    Readout = 2,
    Walk = 3,
    Synthetic = 4,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix64(master), |acc, &t| {
        splitmix64(acc ^ splitmix64(t))
    })
}

pub fn stream(master: u64, purpose: Purpose, tags: &[u64]) -> ChaCha8Rng {
    let mut all = Vec::with_capacity(tags.len() + 1);
    all.push(purpose as u64);
    all.extend_from_slice(tags);
    ChaCha8Rng::seed_from_u64(derive_seed(master, &all))
}
