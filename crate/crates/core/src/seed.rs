//! Deterministic seed derivation.
//!
//! Every random stage draws from its own `ChaCha8Rng`, seeded from a
//! 64-bit value derived from a parent seed and a child label:
//!
//! ```text
//! child(parent, label) = splitmix64(parent ^ splitmix64(label + GOLDEN))
//! ```
//!
//! Labels are either small integers (graph index, trial index, bootstrap
//! iteration) or one of the [`Stage`] tags. The scheme is a pure function,
//! so a sweep can be replayed bit-exactly and trials can run in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Per-stage labels used below a trial seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stage {
    Graph = 0x0047_5241_5048,
    Capture = 0x4341_5054,
    Recapture = 0x0052_4543_4150,
    Hash = 0x4841_5348,
    FalseMatches = 0x0046_414c_5345,
    Bootstrap = 0x424f_4f54,
}

/// Derive a child seed from `parent` and an integer label.
pub fn derive(parent: u64, label: u64) -> u64 {
    splitmix64(parent ^ splitmix64(label.wrapping_add(GOLDEN)))
}

/// Derive the seed for a named stage.
pub fn stage(parent: u64, stage: Stage) -> u64 {
    derive(parent, stage as u64)
}

/// The RNG every component uses.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
