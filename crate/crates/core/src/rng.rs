//! Counter-based random streams.
//!
//! Every trial owns a ChaCha8 stream keyed by the master seed with the trial id as
//! the stream number. Coefficient `n` always sits at the same word offset, so any
//! coefficient can be regenerated without replaying the ones before it.

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Words consumed by one complex Gaussian (two u64 draws).
const WORDS_PER_GAUSSIAN: u128 = 4;

/// Stream tags separating the uses of one master seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    Coefficients = 0,
    Poisson = 1,
    Jitter = 2,
}

/// Stream id for trial `trial` of the grid point `l_index` in `domain`.
pub fn stream_id(domain: Domain, l_index: usize, trial: u64) -> u64 {
    ((domain as u64) << 62) | ((l_index as u64 & 0x3fff) << 48) | (trial & 0xffff_ffff_ffff)
}

#[derive(Clone, Debug)]
pub struct Stream {
    rng: ChaCha8Rng,
}

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Stream { rng }
    }

    /// Uniform on (0, 1].
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard complex Gaussian: density exp(-|z|^2)/pi, E|z|^2 = 1.
    pub fn complex_gaussian(&mut self) -> Complex64 {
        let u1 = self.uniform_open0();
        let u2 = self.uniform();
        Complex64::from_polar((-u1.ln()).sqrt(), std::f64::consts::TAU * u2)
    }

    /// The `index`-th complex Gaussian of the stream, independent of prior draws.
    pub fn complex_gaussian_at(&mut self, index: u64) -> Complex64 {
        self.rng.set_word_pos(index as u128 * WORDS_PER_GAUSSIAN);
        self.complex_gaussian()
    }

    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}
