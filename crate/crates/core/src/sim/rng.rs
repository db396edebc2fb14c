use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

/// A named pseudo-random stream.
///
/// The generator key is derived from `(seed, id)` alone, so adding a component
/// with its own stream never shifts the draws of any other component.
#[derive(Clone, Debug)]
pub struct RngStream {
    id: String,
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, id: impl Into<String>) -> Self {
        let id = id.into();
        let mut hasher = Sha256::new();
        hasher.update(seed.to_le_bytes());
        hasher.update(id.as_bytes());
        let key: [u8; 32] = hasher.finalize().into();
        RngStream {
            id,
            seed,
            rng: ChaCha8Rng::from_seed(key),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A Gaussian draw. `stddev == 0` returns `mean` without consuming randomness.
    pub fn normal(&mut self, mean: f64, stddev: f64) -> f64 {
        if stddev <= 0.0 {
            return mean;
        }
        Normal::new(mean, stddev)
            .expect("finite normal parameters")
            .sample(&mut self.rng)
    }

    pub fn below(&mut self, n: u32) -> u32 {
        self.rng.random_range(0..n)
    }

    pub fn unit(&mut self) -> f64 {
        self.rng.random()
    }
}
