//! Counter-based random streams.
//!
//! Every random draw in the crate comes from a [`StreamId`]: a user seed
//! plus a stage and a task index. Each id maps to its own ChaCha stream, so
//! results do not depend on the order in which parallel tasks execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamId {
    pub seed: u64,
    pub stage: u32,
    pub task: u32,
}

impl StreamId {
    pub fn new(seed: u64, stage: u32, task: u32) -> Self {
        Self { seed, stage, task }
    }

    /// Same seed and stage, different task.
    pub fn with_task(self, task: u32) -> Self {
        Self { task, ..self }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream((u64::from(self.stage) << 32) | u64::from(self.task));
        rng
    }
}

/// Stage identifiers used by the pipelines.
pub mod stage {
    pub const SPHERE_SAMPLE: u32 = 1;
    pub const SPHERE_COAREA: u32 = 2;
    pub const BALL_COAREA: u32 = 3;
    pub const INVERSION_COAREA: u32 = 4;
    pub const RABIER_SCAN: u32 = 5;
    pub const RUGOSITY: u32 = 6;
    pub const VERIFY: u32 = 7;
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let id = StreamId::new(42, 1, 0);
        let a: Vec<u64> = (0..4).map(|_| id.rng().gen()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        let mut r1 = id.rng();
        let mut r2 = id.with_task(1).rng();
        assert_ne!(r1.gen::<u64>(), r2.gen::<u64>());
    }
}
