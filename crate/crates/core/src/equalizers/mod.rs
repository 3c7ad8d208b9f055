//! Semantic aligners behind a common TX pre-transform / RX post-transform
//! interface.

pub mod io;
mod linear;
mod neural;
mod pfe;

pub use linear::{faded_latents, fit_linear, linear_objective, LinearEqualizer, NoiseModel, JITTER};
pub use neural::{
    train_neural, Network, NeuralArch, NeuralEqualizer, Selection, TrainConfig, TrainReport, KERNEL, PRELU_INIT,
};
pub use pfe::{build_pfe, PfeEqualizer};

use crate::error::Result;
use crate::latents::Layout;

/// Architecture plus the dimensions that determine its parameter count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamDims {
    Linear {
        d: usize,
        m: usize,
    },
    /// Hidden width equals `d`.
    Mlp {
        d: usize,
        m: usize,
    },
    /// 5×5 kernel.
    Cnn1 {
        c_in: usize,
        c_out: usize,
    },
    /// 5×5 kernels, hidden channels equal `c_in`.
    Cnn2 {
        c_in: usize,
        c_out: usize,
    },
}

pub fn count_params(dims: &ParamDims) -> usize {
    let k2 = KERNEL * KERNEL;
    match *dims {
        ParamDims::Linear { d, m } => m * d,
        ParamDims::Mlp { d, m } => d * d + d + d * m + m + 1,
        ParamDims::Cnn1 { c_in, c_out } => c_in * c_out * k2 + c_out,
        ParamDims::Cnn2 { c_in, c_out } => c_in * c_in * k2 + c_in + c_in * c_out * k2 + c_out + 1,
    }
}

/// TX pre-aligner `g` and RX post-aligner `f`.
pub trait Aligner {
    /// Maps a TX latent to the real vector handed to the channel.
    fn pre(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// Maps a received real vector to an estimate of the RX latent.
    fn post(&self, received: &[f64], layout: Option<Layout>) -> Result<Vec<f64>>;
}

/// Any fitted aligner, or `None` for the unaligned baseline.
#[derive(Debug, Clone, PartialEq)]
pub enum Equalizer {
    None,
    Linear(LinearEqualizer),
    Neural(NeuralEqualizer),
    Pfe(PfeEqualizer),
}

impl Equalizer {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Linear(_) => "linear",
            Self::Neural(n) => match n.arch() {
                NeuralArch::Mlp => "mlp",
                NeuralArch::Cnn1 => "cnn1",
                NeuralArch::Cnn2 => "cnn2",
            },
            Self::Pfe(_) => "pfe",
        }
    }
}

impl Aligner for Equalizer {
    /// PFE frames with an odd number of rows are padded with one zero
    /// coefficient so the output maps onto whole complex symbols.
    fn pre(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Pfe(p) => {
                let mut c = p.analyze(x)?;
                if c.len() % 2 == 1 {
                    c.push(0.0);
                }
                Ok(c)
            }
            _ => Ok(x.to_vec()),
        }
    }

    fn post(&self, received: &[f64], layout: Option<Layout>) -> Result<Vec<f64>> {
        match self {
            Self::None => Ok(received.to_vec()),
            Self::Linear(l) => l.apply(received),
            Self::Neural(n) => n.forward(received, layout),
            Self::Pfe(p) => {
                let m = p.frame_size();
                let c = if received.len() == m + m % 2 { &received[..m] } else { received };
                p.synthesize(c)
            }
        }
    }
}
