//! Counter-based random streams.
//!
//! Every trial draws from its own ChaCha8 stream keyed by the master seed and
//! addressed by `(point, trial)`. Results therefore depend only on the seed
//! and the trial index, never on how trials are scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type TrialRng = ChaCha8Rng;

const TRIAL_BITS: u32 = 40;
const MAX_POINT: u64 = (1 << (64 - TRIAL_BITS)) - 1;
const MAX_TRIAL: u64 = (1 << TRIAL_BITS) - 1;

#[derive(Debug, Clone)]
pub struct Streams {
    seed: u64,
    base: ChaCha8Rng,
}

impl Streams {
    pub fn new(master_seed: u64) -> Self {
        Self {
            seed: master_seed,
            base: ChaCha8Rng::seed_from_u64(master_seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream for one trial of one sweep point.
    ///
    /// Panics if `point >= 2^24` or `trial >= 2^40`.
    pub fn stream(&self, point: u64, trial: u64) -> TrialRng {
        assert!(point <= MAX_POINT, "point index {point} out of range");
        assert!(trial <= MAX_TRIAL, "trial index {trial} out of range");
        let mut rng = self.base.clone();
        rng.set_stream((point << TRIAL_BITS) | trial);
        rng.set_word_pos(0);
        rng
    }
}
