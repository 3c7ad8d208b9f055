//! Physical layer: per-vector power normalization, the consecutive-pair
//! real/complex mapping, flat Rayleigh fading and AWGN.
//!
//! # Random streams
//!
//! Every random draw comes from a ChaCha8 generator seeded with
//! [`stream_seed`]`(seed, trial, index)`, a SplitMix64 finalizer chained over
//! the three words. Each transmitted vector therefore owns its stream and the
//! outcome of a run does not depend on scheduling. The derivation is part of
//! the public contract and will not change between releases.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numerics::ComplexVector;

/// Generator used for every random stream in the crate.
pub type StreamRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `splitmix(splitmix(splitmix(seed) ^ trial) ^ index)`.
pub fn stream_seed(seed: u64, trial: u64, index: u64) -> u64 {
    splitmix64(splitmix64(splitmix64(seed) ^ trial) ^ index)
}

pub fn stream_rng(seed: u64, trial: u64, index: u64) -> StreamRng {
    StreamRng::seed_from_u64(stream_seed(seed, trial, index))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    /// Per-symbol SNR in dB. `f64::INFINITY` selects a noiseless channel.
    pub snr_db: f64,
    pub fading: bool,
    /// Average power per complex symbol; the per-vector budget is
    /// `P_T = k · symbol_power` for a vector of `k` complex symbols.
    pub symbol_power: f64,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { snr_db: f64::INFINITY, fading: false, symbol_power: 1.0, seed: 0 }
    }
}

impl ChannelConfig {
    pub fn awgn(snr_db: f64) -> Self {
        Self { snr_db, ..Self::default() }
    }

    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn with_fading(mut self, fading: bool) -> Self {
        self.fading = fading;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::Config(format!("snr_db must be a number or +inf, got {}", self.snr_db)));
        }
        if !(self.symbol_power > 0.0 && self.symbol_power.is_finite()) {
            return Err(Error::Config(format!("symbol power must be positive, got {}", self.symbol_power)));
        }
        Ok(())
    }

    /// Noise variance per complex dimension.
    pub fn noise_sigma2(&self) -> f64 {
        snr_to_sigma2(self.snr_db, self.symbol_power)
    }

    /// Noise variance per real dimension, `σ_v²/2`.
    pub fn real_noise_variance(&self) -> f64 {
        0.5 * self.noise_sigma2()
    }

    /// Per-vector power budget for a real vector of length `d`.
    pub fn power_budget(&self, d: usize) -> f64 {
        (d as f64 / 2.0) * self.symbol_power
    }
}

/// Realized channel state for one transmitted vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelRealization {
    pub h: Complex64,
    pub noise_sigma2: f64,
}

impl ChannelRealization {
    pub fn unit() -> Self {
        Self { h: Complex64::new(1.0, 0.0), noise_sigma2: 0.0 }
    }
}

/// Scales `x` so that `‖x‖² = power_budget`.
pub fn power_normalize(x: &[f64], power_budget: f64) -> Result<Vec<f64>> {
    if !x.len().is_multiple_of(2) {
        return Err(Error::OddLength(x.len()));
    }
    let n2: f64 = x.iter().map(|v| v * v).sum();
    if n2 == 0.0 {
        return Err(Error::ZeroVector);
    }
    let g = (power_budget / n2).sqrt();
    Ok(x.iter().map(|v| v * g).collect())
}

/// Component `j` of the result is `x[2j] + i·x[2j+1]`.
pub fn real_to_complex(x: &[f64]) -> Result<ComplexVector> {
    if !x.len().is_multiple_of(2) {
        return Err(Error::OddLength(x.len()));
    }
    Ok(ComplexVector(x.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect()))
}

pub fn complex_to_real(c: &ComplexVector) -> Vec<f64> {
    c.0.iter().flat_map(|z| [z.re, z.im]).collect()
}

/// `σ_v² = symbol_power · 10^(−snr_db/10)`.
pub fn snr_to_sigma2(snr_db: f64, symbol_power: f64) -> f64 {
    symbol_power * 10f64.powf(-snr_db / 10.0)
}

/// Multiplies each consecutive real pair by `h`, i.e. applies the block
/// `[[Re h, −Im h], [Im h, Re h]]`.
pub fn apply_fading_real(x: &[f64], h: Complex64) -> Result<Vec<f64>> {
    if !x.len().is_multiple_of(2) {
        return Err(Error::OddLength(x.len()));
    }
    let mut out = Vec::with_capacity(x.len());
    for p in x.chunks_exact(2) {
        out.push(h.re * p[0] - h.im * p[1]);
        out.push(h.im * p[0] + h.re * p[1]);
    }
    Ok(out)
}

/// Draws a realization: `h ~ CN(0, 1)` when fading is on (exactly `1` when off).
pub fn draw_realization<R: Rng + ?Sized>(cfg: &ChannelConfig, rng: &mut R) -> ChannelRealization {
    let h = if cfg.fading {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex64::new(s * re, s * im)
    } else {
        Complex64::new(1.0, 0.0)
    };
    ChannelRealization { h, noise_sigma2: cfg.noise_sigma2() }
}

/// `c̄ = h·c + v` with one fading draw per vector and i.i.d. `CN(0, σ_v²)` noise.
pub fn transmit<R: Rng + ?Sized>(
    c: &ComplexVector,
    cfg: &ChannelConfig,
    rng: &mut R,
) -> (ComplexVector, ChannelRealization) {
    let realization = draw_realization(cfg, rng);
    let out = pass_through(c, &realization, rng);
    (out, realization)
}

/// Applies an already drawn realization.
pub fn pass_through<R: Rng + ?Sized>(
    c: &ComplexVector,
    realization: &ChannelRealization,
    rng: &mut R,
) -> ComplexVector {
    let h = realization.h;
    let sigma = (0.5 * realization.noise_sigma2).sqrt();
    let out =
        c.0.iter()
            .map(|&z| {
                let faded = if realization.h == Complex64::new(1.0, 0.0) { z } else { h * z };
                if sigma == 0.0 {
                    faded
                } else {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    faded + Complex64::new(sigma * re, sigma * im)
                }
            })
            .collect();
    ComplexVector(out)
}

/// Real-domain wrapper: `x̄ = ψ⁻¹(h·ψ(x) + v)`.
pub fn transmit_real<R: Rng + ?Sized>(
    x: &[f64],
    cfg: &ChannelConfig,
    rng: &mut R,
) -> Result<(Vec<f64>, ChannelRealization)> {
    let c = real_to_complex(x)?;
    let (out, realization) = transmit(&c, cfg, rng);
    Ok((complex_to_real(&out), realization))
}
