//! Counter-addressed Gaussian noise.
//!
//! Every simulated path owns an independent ChaCha8 stream selected by
//! `(seed, path index)`; within it, step `t` always occupies the same fixed
//! block of output words. The draws for a given `(seed, path, step)` are
//! therefore identical no matter how many paths are generated, in which
//! order, or on how many threads.
//!
//! Per step the block yields three standard normals, consumed in this order:
//! the price shock `z_s`, the independent component `z_perp` that is mixed
//! into the variance shock, and the fundamental shock `z_f`.

use std::f64::consts::TAU;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// u32 words consumed per step: four u64 draws feed two Box-Muller pairs.
const WORDS_PER_STEP: u128 = 8;

const INV_2_53: f64 = 1.0 / (1u64 << 53) as f64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepNoise {
    pub z_s: f64,
    pub z_perp: f64,
    pub z_f: f64,
}

impl StepNoise {
    /// Price and variance shocks with correlation `rho`.
    pub fn correlated(&self, rho: f64) -> (f64, f64) {
        mix_pair(rho, self.z_s, self.z_perp)
    }
}

#[derive(Debug, Clone)]
pub struct NoiseStream {
    rng: ChaCha8Rng,
}

impl NoiseStream {
    pub fn new(seed: u64, path: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path as u64);
        Self { rng }
    }

    /// Stream positioned at the first draw of `step`.
    pub fn at(seed: u64, path: usize, step: usize) -> Self {
        let mut s = Self::new(seed, path);
        s.seek(step);
        s
    }

    pub fn seek(&mut self, step: usize) {
        self.rng.set_word_pos(step as u128 * WORDS_PER_STEP);
    }

    /// Draws the noise block of the current step and advances to the next.
    pub fn next_step(&mut self) -> StepNoise {
        let (z_s, z_perp) = self.box_muller();
        let (z_f, _) = self.box_muller();
        StepNoise { z_s, z_perp, z_f }
    }

    /// One correlated `(eps_s, eps_v)` pair; consumes a full step block.
    pub fn correlated_pair(&mut self, rho: f64) -> Result<(f64, f64)> {
        check_rho(rho)?;
        Ok(self.next_step().correlated(rho))
    }

    fn box_muller(&mut self) -> (f64, f64) {
        // u1 in (0, 1] keeps the log finite, u2 in [0, 1).
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * INV_2_53;
        let u2 = (self.rng.next_u64() >> 11) as f64 * INV_2_53;
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (TAU * u2).sin_cos();
        (r * c, r * s)
    }
}

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::domain("rho", format!("{rho} not in [-1, 1]")));
    }
    Ok(())
}

#[inline]
fn mix_pair(rho: f64, z_s: f64, z_perp: f64) -> (f64, f64) {
    (z_s, rho * z_s + (1.0 - rho * rho).sqrt() * z_perp)
}

/// `eps_v = rho * eps_s + sqrt(1 - rho^2) * z` for independent standard normals.
pub fn correlated_normal_pair(rho: f64, eps_s: f64, z: f64) -> Result<(f64, f64)> {
    check_rho(rho)?;
    Ok(mix_pair(rho, eps_s, z))
}

/// Sub-seed for a named purpose, so independent consumers of one master seed
/// never share streams.
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(purpose.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 is 32 bytes"))
}
