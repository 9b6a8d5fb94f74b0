//! Deterministic random streams.
//!
//! Every random quantity in a run is drawn from a ChaCha stream addressed by
//! `(seed, domain, index)`, so results do not depend on evaluation order or on
//! how work is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream domains; each consumer of randomness gets its own.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    Layout = 1,
    Shadowing = 2,
    Channel = 3,
    Drop = 4,
    Test = 99,
}

/// Independent generator for `(seed, domain, index)`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Derives the seed of drop `drop` from the experiment seed.
pub fn drop_seed(seed: u64, drop: u64) -> u64 {
    use rand::RngCore;
    stream(seed, Domain::Drop, drop).next_u64()
}
