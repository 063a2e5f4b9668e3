//! Seeded random streams.
//!
//! Every run derives three independent ChaCha8 streams from its seed
//! (`ChaCha8Rng::seed_from_u64(seed)` with stream ids 0, 1, 2). Arrivals,
//! driver randomization and turn choices each draw from their own stream, so
//! two control strategies run with the same seed see the same arrival process
//! even though their vehicles brake differently. ChaCha output and the
//! `u64 -> f64` conversion used for uniforms are platform independent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const ARRIVALS: u64 = 0;
const DRIVING: u64 = 1;
const ROUTING: u64 = 2;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream(rng)
    }

    /// Uniform draw in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        self.0.gen::<f64>()
    }

    /// Bernoulli trial; `p <= 0` never fires and `p >= 1` always does.
    pub fn chance(&mut self, p: f64) -> bool {
        self.uniform() < p
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngStreams {
    pub arrivals: RngStream,
    pub driving: RngStream,
    pub routing: RngStream,
}

impl RngStreams {
    pub fn from_seed(seed: u64) -> Self {
        RngStreams {
            arrivals: RngStream::new(seed, ARRIVALS),
            driving: RngStream::new(seed, DRIVING),
            routing: RngStream::new(seed, ROUTING),
        }
    }
}
