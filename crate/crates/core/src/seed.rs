//! Seeded random streams.
//!
//! Every tree gets its own ChaCha stream keyed by the run seed and its
//! position `(iteration, node, class, pass)`, so any prefix of a run can be
//! replayed and sibling trees never share draws.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pass {
    Forward = 0,
    Backward = 1,
}

/// Stream for the tree trained at `(iteration, node, class, pass)`.
pub fn tree_rng(seed: u64, iteration: usize, node: usize, class: usize, pass: Pass) -> Rng {
    let stream = ((iteration as u64) << 32)
        ^ ((node as u64 & 0xffff) << 16)
        ^ ((class as u64 & 0x7fff) << 1)
        ^ pass as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream for auxiliary uses (data generation, fold assignment) tagged by a
/// small integer distinct from tree streams.
pub fn aux_rng(seed: u64, tag: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - tag);
    rng
}
