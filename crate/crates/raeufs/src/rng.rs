//! Deterministic random number generation.
//!
//! Every randomized operation in the crate takes an explicit [`RngState`];
//! identical seeds give identical draw sequences on every platform. Derived
//! streams (grid cells, k-means repetitions) come from [`RngState::derive`],
//! so independent units of work never share a stream.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::matrix::Matrix;
use crate::scalar::Scalar;

/// Seeded, counter-based random stream (ChaCha8).
#[derive(Clone, Debug)]
pub struct RngState {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A statistically independent stream for sub-task `stream`.
    ///
    /// Derivation depends only on the original seed, not on how much of this
    /// stream has been consumed.
    pub fn derive(&self, stream: u64) -> Self {
        Self::new(splitmix64(self.seed ^ splitmix64(stream)))
    }

    /// One standard normal draw.
    pub fn normal<S: Scalar>(&mut self) -> S {
        let x: f64 = self.rng.sample(StandardNormal);
        S::of(x)
    }

    /// One uniform draw in `[0, 1)`.
    pub fn uniform<S: Scalar>(&mut self) -> S {
        let x: f64 = self.rng.random();
        S::of(x)
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        if xs.len() < 2 {
            return;
        }
        for i in (1..xs.len()).rev() {
            let j = self.below(i + 1);
            xs.swap(i, j);
        }
    }
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Matrix with i.i.d. standard normal entries.
pub fn gaussian_matrix<S: Scalar>(rows: usize, cols: usize, rng: &mut RngState) -> Matrix<S> {
    Matrix::from_fn(rows, cols, |_, _| rng.normal())
}
