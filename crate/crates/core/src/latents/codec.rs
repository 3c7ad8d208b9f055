//! Affine PCA codec pair on procedurally generated Gabor-patch images.
//!
//! Each codec projects onto the top-`d` principal directions of its own
//! jittered copy of the training images, then applies a seeded rotation of
//! the latent space and a gain that sets the average latent power to `d/2`
//! (one unit per complex channel symbol). Codecs fitted with different seeds
//! span nearly the same subspace in unrelated coordinates, which is the
//! mismatch the equalizers have to undo.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Layout, PilotSet};
use crate::channel::stream_rng;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, SymmetricEigen};

/// Per-pixel standard deviation of the training-set jitter.
const JITTER_STD: f64 = 0.01;

/// `count` images of `side × side` pixels in `[0, 1]`, one per row.
pub fn toy_images(count: usize, side: usize, seed: u64) -> Matrix {
    let n = side * side;
    let mut data = Vec::with_capacity(count * n);
    for i in 0..count {
        let mut rng = stream_rng(seed, 0x696d, i as u64);
        let mut img = vec![0.5; n];
        let patches = rng.random_range(2..=4);
        for _ in 0..patches {
            let amp = rng.random_range(0.1..0.3) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let cx = rng.random_range(0.0..side as f64);
            let cy = rng.random_range(0.0..side as f64);
            let sigma = rng.random_range(1.0..(side as f64 / 3.0).max(1.5));
            let freq = rng.random_range(0.05..0.3);
            let theta = rng.random_range(0.0..PI);
            let phase = rng.random_range(0.0..2.0 * PI);
            let (s, c) = theta.sin_cos();
            for y in 0..side {
                for x in 0..side {
                    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                    let env = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
                    let carrier = (2.0 * PI * freq * (dx * c + dy * s) + phase).cos();
                    img[y * side + x] += amp * env * carrier;
                }
            }
        }
        data.extend(img.into_iter().map(|v| v.clamp(0.0, 1.0)));
    }
    Matrix::new(count, n, data).expect("finite pixels")
}

/// One side of a codec: `x = basis·(u − mean)`, `u = mean + basisᵀ·x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyCodec {
    mean: Vec<f64>,
    /// `d × n`, orthogonal rows scaled by the latent gain.
    basis: Matrix,
    gain: f64,
}

impl ToyCodec {
    pub fn n(&self) -> usize {
        self.basis.cols()
    }

    pub fn d(&self) -> usize {
        self.basis.rows()
    }

    pub fn encode(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), actual: u.len() });
        }
        let centred: Vec<f64> = u.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        self.basis.matvec(&centred)
    }

    pub fn decode(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut u = self.basis.tmatvec(x)?;
        let inv = 1.0 / (self.gain * self.gain);
        for (v, m) in u.iter_mut().zip(&self.mean) {
            *v = *v * inv + m;
        }
        Ok(u)
    }

    /// Encodes every row of `images`.
    pub fn encode_all(&self, images: &Matrix) -> Result<Matrix> {
        let rows = (0..images.rows()).map(|i| self.encode(images.row(i))).collect::<Result<Vec<_>>>()?;
        Matrix::from_rows(&rows)
    }
}

/// Matched encoder/decoder pair produced by one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyCodecPair {
    pub codec: ToyCodec,
    pub seed: u64,
}

impl ToyCodecPair {
    pub fn encoder(&self) -> &ToyCodec {
        &self.codec
    }

    pub fn decoder(&self) -> &ToyCodec {
        &self.codec
    }

    /// Bandwidth ratio `ρ = (d/2)/n`.
    pub fn bandwidth_ratio(&self) -> f64 {
        (self.codec.d() as f64 / 2.0) / self.codec.n() as f64
    }

    pub fn round_trip(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.codec.decode(&self.codec.encode(u)?)
    }
}

/// Fits a PCA codec with latent size `d` on a seed-jittered copy of `images`.
pub fn fit_toy_codec(images: &Matrix, d: usize, seed: u64) -> Result<ToyCodecPair> {
    let (count, n) = images.shape();
    if d == 0 || d > n {
        return Err(Error::InsufficientData(format!("latent size {d} must be in 1..={n}")));
    }
    if count < d {
        return Err(Error::InsufficientData(format!("{count} images for {d} principal directions")));
    }
    let mut rng = stream_rng(seed, 0x636f, 0);
    let jittered = Matrix::from_fn(count, n, |r, c| images[(r, c)] + JITTER_STD * rng.sample::<f64, _>(StandardNormal));
    let mean: Vec<f64> = (0..n).map(|c| (0..count).map(|r| jittered[(r, c)]).sum::<f64>() / count as f64).collect();
    let centred = Matrix::from_fn(count, n, |r, c| jittered[(r, c)] - mean[c]);
    let eig = SymmetricEigen::new(&centred.tgram())?;
    // top-d eigenvectors, strongest first, as rows
    let pcs = Matrix::from_fn(d, n, |r, c| eig.vectors[(c, n - 1 - r)]);
    let rotation = Matrix::random_orthogonal(d, &mut rng);
    let unit_basis = rotation.matmul(&pcs)?;

    let projected = centred.matmul(&unit_basis.transpose())?;
    let mean_power = projected.as_slice().iter().map(|v| v * v).sum::<f64>() / count as f64;
    let gain = if mean_power > 0.0 { ((d as f64 / 2.0) / mean_power).sqrt() } else { 1.0 };

    Ok(ToyCodecPair { codec: ToyCodec { mean, basis: unit_basis.scale(gain), gain }, seed })
}

/// Two independently fitted codecs and the images that feed them.
#[derive(Debug, Clone)]
pub struct CodecScenario {
    pub tx: ToyCodecPair,
    pub rx: ToyCodecPair,
    pub train_images: Matrix,
    pub eval_images: Matrix,
}

impl CodecScenario {
    /// Images are drawn from `data_seed`; the codecs are fitted on the train
    /// images with `seed_tx` and `seed_rx`.
    pub fn build(
        side: usize,
        d: usize,
        train_count: usize,
        eval_count: usize,
        seed_tx: u64,
        seed_rx: u64,
        data_seed: u64,
    ) -> Result<Self> {
        let all = toy_images(train_count + eval_count, side, data_seed);
        let n = side * side;
        let train_images = Matrix::new(train_count, n, all.as_slice()[..train_count * n].to_vec())?;
        let eval_images = Matrix::new(eval_count, n, all.as_slice()[train_count * n..].to_vec())?;
        let tx = fit_toy_codec(&train_images, d, seed_tx)?;
        let rx = fit_toy_codec(&train_images, d, seed_rx)?;
        Ok(Self { tx, rx, train_images, eval_images })
    }

    /// Latent layout handed to the convolutional aligners: one channel per
    /// latent coordinate on a 1×1 grid.
    pub fn layout(&self) -> Layout {
        Layout::new(self.tx.codec.d(), 1, 1)
    }

    /// Pilot pairs `(tx.encode(u), rx.encode(u))` for every row of `images`.
    pub fn pilots(&self, images: &Matrix) -> Result<PilotSet> {
        let x = self.tx.codec.encode_all(images)?;
        let y = self.rx.codec.encode_all(images)?;
        let layout = Some(self.layout());
        PilotSet::new(x, y)?.with_layouts(layout, layout)
    }
}
