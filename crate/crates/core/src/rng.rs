//! Seed expansion.
//!
//! Every random stream in a run is a ChaCha8 keystream keyed by the run seed
//! and selected by a 64-bit stream id built from a domain tag and an index.
//! The keystream position is a counter, so each (seed, domain, index) triple
//! yields the same draws on every platform regardless of evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains. Values are part of the reproducibility contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Domain {
    Deployment = 1,
    Device = 2,
    Gateway = 3,
}

pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((domain as u64) << 56) ^ (index & 0x00ff_ffff_ffff_ffff));
    rng
}
