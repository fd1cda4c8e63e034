//! Seed-derived random substreams.
//!
//! Every `(replicate, agent, stage)` triple owns an independent ChaCha8 stream
//! seeded with `SHA-256(seed ‖ replicate ‖ agent ‖ stage)`, each field encoded
//! as 8 little-endian bytes. Results therefore do not depend on the order in
//! which agents or replicates are evaluated.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Recorded in run metadata.
pub const PRNG_ID: &str =
    "rand_chacha::ChaCha8Rng; seed = SHA-256(seed_le64 || replicate_le64 || agent_le64 || stage_le64)";

/// Stage slot reserved for drawing an agent's initial state.
pub const INIT_STAGE: u64 = u64::MAX;

pub type SubRng = ChaCha8Rng;

pub fn substream(seed: u64, replicate: u64, agent: u64, stage: u64) -> SubRng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(replicate.to_le_bytes());
    h.update(agent.to_le_bytes());
    h.update(stage.to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}
