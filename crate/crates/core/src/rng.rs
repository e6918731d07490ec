//! Deterministic per-trial random streams.
//!
//! A trial seed fans out into independent named substreams, so adding draws
//! to one component never shifts the values another component sees.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Substream {
    /// Traffic placement and gap noise.
    Scenario,
    /// Per-agent reaction and yield thresholds.
    Thresholds,
}

impl Substream {
    fn stream_id(self) -> u64 {
        match self {
            Substream::Scenario => 1,
            Substream::Thresholds => 2,
        }
    }
}

pub fn substream(seed: u64, stream: Substream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream.stream_id());
    rng
}
