use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{Layout, PilotSet};
use crate::channel::{power_normalize, stream_rng, stream_seed, StreamRng};
use crate::conv::Conv2d;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Strength of the elementwise warp of the mildly-nonlinear family.
pub const WARP_ALPHA: f64 = 0.1;

/// Spatial taps of conv-local maps stay inside this window.
const CONV_LOCAL_SUPPORT: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MismatchFamily {
    Orthogonal,
    GeneralLinear,
    Permutation,
    ConvLocal,
    MildlyNonlinear,
}

impl MismatchFamily {
    fn tag(self) -> u64 {
        match self {
            Self::Orthogonal => 1,
            Self::GeneralLinear => 2,
            Self::Permutation => 3,
            Self::ConvLocal => 4,
            Self::MildlyNonlinear => 5,
        }
    }
}

impl fmt::Display for MismatchFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Orthogonal => "orthogonal",
            Self::GeneralLinear => "general-linear",
            Self::Permutation => "permutation",
            Self::ConvLocal => "conv-local",
            Self::MildlyNonlinear => "mildly-nonlinear",
        })
    }
}

impl FromStr for MismatchFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "orthogonal" => Self::Orthogonal,
            "general-linear" => Self::GeneralLinear,
            "permutation" => Self::Permutation,
            "conv-local" => Self::ConvLocal,
            "mildly-nonlinear" => Self::MildlyNonlinear,
            other => return Err(Error::Config(format!("unknown mismatch family `{other}`"))),
        })
    }
}

/// Describes a synthetic TX/RX latent-space mismatch.
///
/// `seed_tx`/`seed_rx` play the role of the two independent training runs;
/// equal seeds with `d == m` give the identity map. `data_seed` drives the
/// base latents, so pilots for different mismatches can share inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct MismatchSpec {
    pub family: MismatchFamily,
    pub seed_tx: u64,
    pub seed_rx: u64,
    pub d: usize,
    pub m: usize,
    /// Required by the conv-local family, optional otherwise.
    pub layout: Option<Layout>,
    pub data_seed: u64,
}

impl MismatchSpec {
    pub fn new(family: MismatchFamily, d: usize, m: usize, seed_tx: u64, seed_rx: u64) -> Self {
        Self { family, seed_tx, seed_rx, d, m, layout: None, data_seed: 0 }
    }

    pub fn with_layout(mut self, layout: Layout) -> Self {
        self.layout = Some(layout);
        self.d = layout.len();
        self.m = layout.len();
        self
    }

    pub fn with_data_seed(mut self, seed: u64) -> Self {
        self.data_seed = seed;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.d == 0 || self.m == 0 {
            return Err(Error::Config("latent dimensions must be positive".into()));
        }
        if !self.d.is_multiple_of(2) {
            return Err(Error::OddLength(self.d));
        }
        let square =
            matches!(self.family, MismatchFamily::Orthogonal | MismatchFamily::Permutation | MismatchFamily::ConvLocal);
        if square && self.d != self.m {
            return Err(Error::DimensionMismatch { expected: self.d, actual: self.m });
        }
        if let Some(l) = self.layout {
            if l.len() != self.d {
                return Err(Error::DimensionMismatch { expected: self.d, actual: l.len() });
            }
        }
        if self.family == MismatchFamily::ConvLocal && self.layout.is_none() {
            return Err(Error::LayoutMissing);
        }
        Ok(())
    }

    fn pair_rng(&self) -> StreamRng {
        stream_rng(stream_seed(self.seed_tx, self.seed_rx, self.family.tag()), 0x6d6d, 0)
    }
}

/// The ground-truth map `T` with `y = T(x)`.
#[derive(Debug, Clone, PartialEq)]
pub enum MismatchMap {
    Identity,
    Linear(Matrix),
    Permutation(Vec<usize>),
    Conv(Conv2d),
    Warped { linear: Matrix, alpha: f64 },
}

impl MismatchMap {
    pub fn build(spec: &MismatchSpec) -> Result<Self> {
        spec.validate()?;
        if spec.seed_tx == spec.seed_rx && spec.d == spec.m {
            return Ok(Self::Identity);
        }
        let (d, m) = (spec.d, spec.m);
        Ok(match spec.family {
            MismatchFamily::Orthogonal => {
                let q_tx = Matrix::random_orthogonal(d, &mut stream_rng(spec.seed_tx, 0x6f72, 0));
                let q_rx = Matrix::random_orthogonal(d, &mut stream_rng(spec.seed_rx, 0x6f72, 0));
                Self::Linear(q_rx.matmul(&q_tx.transpose())?)
            }
            MismatchFamily::GeneralLinear => Self::Linear(general_linear(m, d, &mut spec.pair_rng())),
            MismatchFamily::Permutation => {
                let p_tx = seeded_permutation(d, spec.seed_tx);
                let p_rx = seeded_permutation(d, spec.seed_rx);
                // TX stores feature f at p_tx[f], RX expects it at p_rx[f].
                let mut source = vec![0; d];
                for (f, &pos) in p_rx.iter().enumerate() {
                    source[pos] = p_tx[f];
                }
                Self::Permutation(source)
            }
            MismatchFamily::ConvLocal => {
                let layout = spec.layout.ok_or(Error::LayoutMissing)?;
                Self::Conv(conv_local(layout.channels, &mut spec.pair_rng()))
            }
            MismatchFamily::MildlyNonlinear => {
                Self::Warped { linear: general_linear(m, d, &mut spec.pair_rng()), alpha: WARP_ALPHA }
            }
        })
    }

    /// Applies `T`; conv maps need the spatial layout of `x`.
    pub fn apply(&self, x: &[f64], layout: Option<Layout>) -> Result<Vec<f64>> {
        match self {
            Self::Identity => Ok(x.to_vec()),
            Self::Linear(t) => t.matvec(x),
            Self::Permutation(source) => {
                if x.len() != source.len() {
                    return Err(Error::DimensionMismatch { expected: source.len(), actual: x.len() });
                }
                Ok(source.iter().map(|&s| x[s]).collect())
            }
            Self::Conv(conv) => conv.forward(x, layout.ok_or(Error::LayoutMissing)?),
            Self::Warped { linear, alpha } => {
                let z = linear.matvec(x)?;
                Ok(z.iter().map(|v| v + alpha * v.tanh()).collect())
            }
        }
    }
}

fn general_linear(m: usize, d: usize, rng: &mut StreamRng) -> Matrix {
    Matrix::random_normal(m, d, rng).scale(1.0 / (d as f64).sqrt())
}

fn seeded_permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(&mut stream_rng(seed, 0x7065, 0));
    p
}

/// Random channel mixing on the centre tap plus small taps in a 3×3 window,
/// embedded in a 5×5 kernel.
fn conv_local(channels: usize, rng: &mut StreamRng) -> Conv2d {
    let mut conv = Conv2d::zeros(channels, channels, 5);
    let mix = Matrix::random_orthogonal(channels, rng);
    let lo = (5 - CONV_LOCAL_SUPPORT) / 2;
    for o in 0..channels {
        for i in 0..channels {
            *conv.w_mut(o, i, 2, 2) = mix[(o, i)];
            for ky in lo..lo + CONV_LOCAL_SUPPORT {
                for kx in lo..lo + CONV_LOCAL_SUPPORT {
                    let z: f64 = rng.sample(StandardNormal);
                    *conv.w_mut(o, i, ky, kx) += 0.15 * z;
                }
            }
        }
    }
    conv
}

/// Correlated Gaussian latents with geometrically decaying spectrum
/// (`σ_j = 0.85^j` along a random orthonormal basis), or spatially smooth
/// fields when a layout is given. Each vector is normalized to `‖x‖² = d/2`.
fn base_latents(d: usize, layout: Option<Layout>, count: usize, seed: u64) -> Result<Matrix> {
    let mut rng = stream_rng(seed, 0x6c61, 0);
    let mut rows = Vec::with_capacity(count);
    match layout {
        None => {
            let basis = Matrix::random_orthogonal(d, &mut rng);
            let scales: Vec<f64> = (0..d).map(|j| 0.85f64.powi(j as i32)).collect();
            for _ in 0..count {
                let z: Vec<f64> = scales.iter().map(|s| s * rng.sample::<f64, _>(StandardNormal)).collect();
                let x = basis.matvec(&z)?;
                rows.push(power_normalize(&x, d as f64 / 2.0)?);
            }
        }
        Some(l) => {
            let smooth = smoothing_kernel(l.channels);
            for _ in 0..count {
                let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let x = smooth.forward(&z, l)?;
                rows.push(power_normalize(&x, d as f64 / 2.0)?);
            }
        }
    }
    Matrix::from_rows(&rows)
}

/// Per-channel binomial `[1 2 1]ᵀ[1 2 1]/16` blur.
fn smoothing_kernel(channels: usize) -> Conv2d {
    let mut conv = Conv2d::zeros(channels, channels, 5);
    let taps = [1.0, 2.0, 1.0];
    for c in 0..channels {
        for (a, ty) in taps.iter().enumerate() {
            for (b, tx) in taps.iter().enumerate() {
                *conv.w_mut(c, c, a + 1, b + 1) = ty * tx / 16.0;
            }
        }
    }
    conv
}

/// Output of [`generate_mismatch`].
#[derive(Debug, Clone)]
pub struct MismatchData {
    pub train: PilotSet,
    pub eval: PilotSet,
    pub map: MismatchMap,
}

/// Draws `train_count + eval_count` base latents, maps them through the
/// seeded mismatch and splits them into disjoint train/eval pilot sets.
pub fn generate_mismatch(spec: &MismatchSpec, train_count: usize, eval_count: usize) -> Result<MismatchData> {
    if train_count == 0 {
        return Err(Error::EmptyPilotSet);
    }
    let map = MismatchMap::build(spec)?;
    let total = train_count + eval_count;
    let x = base_latents(spec.d, spec.layout, total, spec.data_seed)?;
    let mut y_rows = Vec::with_capacity(total);
    for i in 0..total {
        y_rows.push(map.apply(x.row(i), spec.layout)?);
    }
    let y = Matrix::from_rows(&y_rows)?;
    let all = PilotSet::new(x, y)?.with_layouts(spec.layout, spec.layout)?;
    let (train, eval) = all.split_at(train_count);
    Ok(MismatchData { train, eval, map })
}
