use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of chain `index` derived from a user seed:
/// `splitmix64(seed + (index + 1) * 0x9E3779B97F4A7C15)`.
pub fn chain_seed(seed: u64, index: usize) -> u64 {
    splitmix64(seed.wrapping_add((index as u64 + 1).wrapping_mul(GOLDEN)))
}

/// Counter-based stream family. Each `(iteration, stage, unit)` triple owns an
/// independent ChaCha stream, so per-household work can run in any order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    seed: u64,
}

impl RngStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, iteration: u64, stage: u64, unit: u64) -> StreamRng {
        let key = splitmix64(self.seed ^ splitmix64(iteration ^ splitmix64(stage)));
        let mut rng = ChaCha8Rng::seed_from_u64(key);
        rng.set_stream(unit);
        rng
    }
}
