//! Context-aware recommendation engine built on hybrid Q-learning.
//!
//! The crate is `no_std` and only needs `alloc`. It holds the pure parts of
//! the engine:
//!
//! - [`context`]: time and location abstraction, situation aggregation and
//!   the canonical state encoding used as the Q-learning state key.
//! - [`qlearning`]: the tabular value store, the one-step update and the
//!   greedy / ε-greedy baseline policies.
//! - [`collab`]: implicit-rating collaborative filtering (memory-based fill
//!   of vacant cells followed by an item-neighbourhood model).
//! - [`casebase`]: case retrieval, reuse and retention.
//! - [`hyql`]: the agent that composes the three.
//! - [`sim`]: a seeded population of simulated users and the cold-start
//!   experiment protocol.
//!
//! Persistence, configuration files and the command line live in the `hyql`
//! companion crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod casebase;
pub mod collab;
pub mod context;
mod error;
pub mod hyql;
pub mod qlearning;
pub mod sim;

pub use error::{Error, Result};

/// The seeded generator used everywhere randomness is needed.
pub type Rng = rand_chacha::ChaCha8Rng;

/// Builds the crate's generator from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> Rng {
    use rand::SeedableRng;
    Rng::seed_from_u64(seed)
}
