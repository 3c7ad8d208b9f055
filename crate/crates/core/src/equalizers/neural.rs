//! Neural post-aligners with hand-written backpropagation: a one-hidden-layer
//! MLP, a single 5×5 convolution and two convolutions around a PReLU.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::channel::{stream_rng, transmit_real, ChannelConfig};
use crate::conv::Conv2d;
use crate::error::{Error, Result};
use crate::latents::{Layout, PilotSet};
use crate::numerics::{dot, Matrix};

pub const KERNEL: usize = 5;
pub const PRELU_INIT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NeuralArch {
    Mlp,
    Cnn1,
    Cnn2,
}

impl fmt::Display for NeuralArch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mlp => "mlp",
            Self::Cnn1 => "cnn1",
            Self::Cnn2 => "cnn2",
        })
    }
}

impl FromStr for NeuralArch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlp" => Ok(Self::Mlp),
            "cnn1" => Ok(Self::Cnn1),
            "cnn2" => Ok(Self::Cnn2),
            other => Err(Error::Config(format!("unknown neural architecture `{other}`"))),
        }
    }
}

#[inline]
fn prelu(z: f64, a: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        a * z
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Mlp { w1: Matrix, b1: Vec<f64>, slope: f64, w2: Matrix, b2: Vec<f64> },
    Cnn1 { conv: Conv2d },
    Cnn2 { conv1: Conv2d, slope: f64, conv2: Conv2d },
}

/// A trained (or freshly initialized) neural post-aligner `f_θ: ℝ^d → ℝ^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuralEqualizer {
    net: Network,
}

fn uniform_fill<R: Rng + ?Sized>(values: &mut [f64], bound: f64, rng: &mut R) {
    for v in values {
        *v = rng.random_range(-bound..bound);
    }
}

impl NeuralEqualizer {
    pub fn from_network(net: Network) -> Self {
        Self { net }
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    /// MLP with hidden width `d`, weights and biases drawn from
    /// `U(−1/√fan_in, 1/√fan_in)`.
    pub fn mlp<R: Rng + ?Sized>(d: usize, m: usize, rng: &mut R) -> Self {
        let h = d;
        let b = 1.0 / (d as f64).sqrt();
        let mut w1 = Matrix::zeros(h, d);
        let mut b1 = vec![0.0; h];
        uniform_fill(w1.as_mut_slice(), b, rng);
        uniform_fill(&mut b1, b, rng);
        let b = 1.0 / (h as f64).sqrt();
        let mut w2 = Matrix::zeros(m, h);
        let mut b2 = vec![0.0; m];
        uniform_fill(w2.as_mut_slice(), b, rng);
        uniform_fill(&mut b2, b, rng);
        Self { net: Network::Mlp { w1, b1, slope: PRELU_INIT, w2, b2 } }
    }

    fn random_conv<R: Rng + ?Sized>(c_in: usize, c_out: usize, rng: &mut R) -> Conv2d {
        let mut conv = Conv2d::zeros(c_in, c_out, KERNEL);
        let b = 1.0 / ((c_in * KERNEL * KERNEL) as f64).sqrt();
        uniform_fill(&mut conv.weight, b, rng);
        uniform_fill(&mut conv.bias, b, rng);
        conv
    }

    pub fn cnn1<R: Rng + ?Sized>(c_in: usize, c_out: usize, rng: &mut R) -> Self {
        Self { net: Network::Cnn1 { conv: Self::random_conv(c_in, c_out, rng) } }
    }

    /// Hidden channel count equals `c_in`.
    pub fn cnn2<R: Rng + ?Sized>(c_in: usize, c_out: usize, rng: &mut R) -> Self {
        let conv1 = Self::random_conv(c_in, c_in, rng);
        let conv2 = Self::random_conv(c_in, c_out, rng);
        Self { net: Network::Cnn2 { conv1, slope: PRELU_INIT, conv2 } }
    }

    /// Fresh network of the requested architecture sized for `pilots`.
    pub fn init_for<R: Rng + ?Sized>(arch: NeuralArch, pilots: &PilotSet, rng: &mut R) -> Result<Self> {
        match arch {
            NeuralArch::Mlp => Ok(Self::mlp(pilots.d(), pilots.m(), rng)),
            NeuralArch::Cnn1 | NeuralArch::Cnn2 => {
                let lx = pilots.x_layout().ok_or(Error::LayoutMissing)?;
                let ly = pilots.y_layout().ok_or(Error::LayoutMissing)?;
                if (lx.height, lx.width) != (ly.height, ly.width) {
                    return Err(Error::DimensionMismatch {
                        expected: lx.height * lx.width,
                        actual: ly.height * ly.width,
                    });
                }
                Ok(if arch == NeuralArch::Cnn1 {
                    Self::cnn1(lx.channels, ly.channels, rng)
                } else {
                    Self::cnn2(lx.channels, ly.channels, rng)
                })
            }
        }
    }

    pub fn arch(&self) -> NeuralArch {
        match self.net {
            Network::Mlp { .. } => NeuralArch::Mlp,
            Network::Cnn1 { .. } => NeuralArch::Cnn1,
            Network::Cnn2 { .. } => NeuralArch::Cnn2,
        }
    }

    /// `(d, hidden, m)` for the MLP, `(c_in, c_out, kernel)` for the CNNs.
    pub fn dims(&self) -> [usize; 3] {
        match &self.net {
            Network::Mlp { w1, w2, .. } => [w1.cols(), w1.rows(), w2.rows()],
            Network::Cnn1 { conv } => [conv.c_in, conv.c_out, conv.kernel],
            Network::Cnn2 { conv1, conv2, .. } => [conv1.c_in, conv2.c_out, conv1.kernel],
        }
    }

    /// Named parameter tensors and their ranges in the flat parameter vector.
    pub fn param_groups(&self) -> Vec<(&'static str, Range<usize>)> {
        let mut out = Vec::new();
        let mut at = 0;
        let mut push = |name, len: usize| {
            out.push((name, at..at + len));
            at += len;
        };
        match &self.net {
            Network::Mlp { w1, b1, w2, b2, .. } => {
                push("w1", w1.as_slice().len());
                push("b1", b1.len());
                push("slope", 1);
                push("w2", w2.as_slice().len());
                push("b2", b2.len());
            }
            Network::Cnn1 { conv } => {
                push("weight", conv.weight.len());
                push("bias", conv.bias.len());
            }
            Network::Cnn2 { conv1, conv2, .. } => {
                push("w1", conv1.weight.len());
                push("b1", conv1.bias.len());
                push("slope", 1);
                push("w2", conv2.weight.len());
                push("b2", conv2.bias.len());
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        match &self.net {
            Network::Mlp { w1, b1, w2, b2, .. } => w1.as_slice().len() + b1.len() + 1 + w2.as_slice().len() + b2.len(),
            Network::Cnn1 { conv } => conv.param_count(),
            Network::Cnn2 { conv1, conv2, .. } => conv1.param_count() + 1 + conv2.param_count(),
        }
    }

    /// Flat parameter vector in [`Self::param_groups`] order.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        match &self.net {
            Network::Mlp { w1, b1, slope, w2, b2 } => {
                p.extend_from_slice(w1.as_slice());
                p.extend_from_slice(b1);
                p.push(*slope);
                p.extend_from_slice(w2.as_slice());
                p.extend_from_slice(b2);
            }
            Network::Cnn1 { conv } => {
                p.extend_from_slice(&conv.weight);
                p.extend_from_slice(&conv.bias);
            }
            Network::Cnn2 { conv1, slope, conv2 } => {
                p.extend_from_slice(&conv1.weight);
                p.extend_from_slice(&conv1.bias);
                p.push(*slope);
                p.extend_from_slice(&conv2.weight);
                p.extend_from_slice(&conv2.bias);
            }
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.param_count() {
            return Err(Error::DimensionMismatch { expected: self.param_count(), actual: p.len() });
        }
        let mut rest = p;
        let mut take = |dst: &mut [f64]| {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        };
        match &mut self.net {
            Network::Mlp { w1, b1, slope, w2, b2 } => {
                take(w1.as_mut_slice());
                take(b1);
                take(std::slice::from_mut(slope));
                take(w2.as_mut_slice());
                take(b2);
            }
            Network::Cnn1 { conv } => {
                take(&mut conv.weight);
                take(&mut conv.bias);
            }
            Network::Cnn2 { conv1, slope, conv2 } => {
                take(&mut conv1.weight);
                take(&mut conv1.bias);
                take(std::slice::from_mut(slope));
                take(&mut conv2.weight);
                take(&mut conv2.bias);
            }
        }
        Ok(())
    }

    /// Indices of parameters that carry L2 weight decay (all but the PReLU slope).
    fn decayed(&self) -> Vec<bool> {
        let mut mask = vec![true; self.param_count()];
        for (name, r) in self.param_groups() {
            if name == "slope" {
                mask[r.start] = false;
            }
        }
        mask
    }

    fn conv_layout(&self, x: &[f64], layout: Option<Layout>) -> Result<Layout> {
        let l = layout.ok_or(Error::LayoutMissing)?;
        if l.len() != x.len() {
            return Err(Error::DimensionMismatch { expected: l.len(), actual: x.len() });
        }
        Ok(l)
    }

    /// `ŷ = f_θ(x̄)`. Convolutional networks need the spatial layout of `x̄`
    /// and accept any height and width.
    pub fn forward(&self, x: &[f64], layout: Option<Layout>) -> Result<Vec<f64>> {
        match &self.net {
            Network::Mlp { w1, b1, slope, w2, b2 } => {
                let mut z = w1.matvec(x)?;
                for (v, b) in z.iter_mut().zip(b1) {
                    *v = prelu(*v + b, *slope);
                }
                let mut out = w2.matvec(&z)?;
                out.iter_mut().zip(b2).for_each(|(o, b)| *o += b);
                Ok(out)
            }
            Network::Cnn1 { conv } => conv.forward(x, self.conv_layout(x, layout)?),
            Network::Cnn2 { conv1, slope, conv2 } => {
                let l = self.conv_layout(x, layout)?;
                let mut z = conv1.forward(x, l)?;
                z.iter_mut().for_each(|v| *v = prelu(*v, *slope));
                conv2.forward(&z, conv1.output_layout(l))
            }
        }
    }

    /// Loss `½‖y − f_θ(x̄)‖²` and its gradient with respect to every
    /// parameter, in flat [`Self::params`] order.
    pub fn backward(&self, x: &[f64], layout: Option<Layout>, target: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut grad = vec![0.0; self.param_count()];
        let loss = self.accumulate_gradient(x, layout, target, &mut grad)?;
        Ok((loss, grad))
    }

    /// Like [`Self::backward`] but adds the gradient into `grad`.
    pub fn accumulate_gradient(
        &self,
        x: &[f64],
        layout: Option<Layout>,
        target: &[f64],
        grad: &mut [f64],
    ) -> Result<f64> {
        if grad.len() != self.param_count() {
            return Err(Error::DimensionMismatch { expected: self.param_count(), actual: grad.len() });
        }
        match &self.net {
            Network::Mlp { w1, b1, slope, w2, b2 } => {
                let mut pre = w1.matvec(x)?;
                pre.iter_mut().zip(b1).for_each(|(v, b)| *v += b);
                let act: Vec<f64> = pre.iter().map(|&z| prelu(z, *slope)).collect();
                let mut out = w2.matvec(&act)?;
                out.iter_mut().zip(b2).for_each(|(o, b)| *o += b);
                let err = residual(&out, target)?;
                let loss = 0.5 * dot(&err, &err);

                let (h, d, m) = (w1.rows(), w1.cols(), w2.rows());
                let g_act = w2.tmatvec(&err)?;
                let mut g_pre = vec![0.0; h];
                let mut g_slope = 0.0;
                for j in 0..h {
                    if pre[j] > 0.0 {
                        g_pre[j] = g_act[j];
                    } else {
                        g_pre[j] = g_act[j] * slope;
                        g_slope += g_act[j] * pre[j];
                    }
                }
                let (gw1, rest) = grad.split_at_mut(h * d);
                let (gb1, rest) = rest.split_at_mut(h);
                let (gs, rest) = rest.split_at_mut(1);
                let (gw2, gb2) = rest.split_at_mut(m * h);
                for j in 0..h {
                    gw1[j * d..(j + 1) * d].iter_mut().zip(x).for_each(|(g, &xi)| *g += g_pre[j] * xi);
                }
                gb1.iter_mut().zip(&g_pre).for_each(|(g, v)| *g += v);
                gs[0] += g_slope;
                for o in 0..m {
                    gw2[o * h..(o + 1) * h].iter_mut().zip(&act).for_each(|(g, &a)| *g += err[o] * a);
                }
                gb2.iter_mut().zip(&err).for_each(|(g, v)| *g += v);
                Ok(loss)
            }
            Network::Cnn1 { conv } => {
                let l = self.conv_layout(x, layout)?;
                let out = conv.forward(x, l)?;
                let err = residual(&out, target)?;
                let (gw, gb) = grad.split_at_mut(conv.weight.len());
                conv.backward_accumulate(x, l, &err, gw, gb, None)?;
                Ok(0.5 * dot(&err, &err))
            }
            Network::Cnn2 { conv1, slope, conv2 } => {
                let l = self.conv_layout(x, layout)?;
                let pre = conv1.forward(x, l)?;
                let act: Vec<f64> = pre.iter().map(|&z| prelu(z, *slope)).collect();
                let hidden = conv1.output_layout(l);
                let out = conv2.forward(&act, hidden)?;
                let err = residual(&out, target)?;
                let (gw1, rest) = grad.split_at_mut(conv1.weight.len());
                let (gb1, rest) = rest.split_at_mut(conv1.c_out);
                let (gs, rest) = rest.split_at_mut(1);
                let (gw2, gb2) = rest.split_at_mut(conv2.weight.len());
                let mut g_act = vec![0.0; act.len()];
                conv2.backward_accumulate(&act, hidden, &err, gw2, gb2, Some(&mut g_act))?;
                let mut g_slope = 0.0;
                for (g, &z) in g_act.iter_mut().zip(&pre) {
                    if z <= 0.0 {
                        g_slope += *g * z;
                        *g *= slope;
                    }
                }
                gs[0] += g_slope;
                conv1.backward_accumulate(x, l, &g_act, gw1, gb1, None)?;
                Ok(0.5 * dot(&err, &err))
            }
        }
    }
}

fn residual(out: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    if out.len() != target.len() {
        return Err(Error::DimensionMismatch { expected: out.len(), actual: target.len() });
    }
    Ok(out.iter().zip(target).map(|(o, t)| o - t).collect())
}

/// Optimizer and model-selection settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without improvement of the selection loss before stopping.
    pub patience: usize,
    pub validation_fraction: f64,
    /// Below this many pilots the training loss drives model selection.
    pub min_pilots_for_validation: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
}

impl TrainConfig {
    /// Learning rate 1e-4 without weight decay for the MLP, 1e-3 with 1e-3
    /// weight decay for the CNNs.
    pub fn for_arch(arch: NeuralArch) -> Self {
        let (learning_rate, weight_decay) = match arch {
            NeuralArch::Mlp => (1e-4, 0.0),
            NeuralArch::Cnn1 | NeuralArch::Cnn2 => (1e-3, 1e-3),
        };
        Self {
            learning_rate,
            weight_decay,
            batch_size: 64,
            max_epochs: 2000,
            patience: 20,
            validation_fraction: 0.1,
            min_pilots_for_validation: 10,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Validation,
    Training,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub selection: Selection,
    pub epochs_run: usize,
    pub best_epoch: usize,
    /// Selection loss of every checkpoint that became the new best, in order.
    pub best_losses: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    decay_mask: Vec<bool>,
    t: i32,
}

impl Adam {
    fn new(n: usize, decay_mask: Vec<bool>) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], decay_mask, t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], cfg: &TrainConfig) {
        self.t += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.t);
        let bc2 = 1.0 - cfg.beta2.powi(self.t);
        for i in 0..params.len() {
            let mut g = grad[i];
            if self.decay_mask[i] {
                g += cfg.weight_decay * params[i];
            }
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g;
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g * g;
            let mh = self.m[i] / bc1;
            let vh = self.v[i] / bc2;
            params[i] -= cfg.learning_rate * mh / (vh.sqrt() + cfg.epsilon);
        }
    }
}

const VALIDATION_STREAM: u64 = u64::MAX - 1;

/// Mean per-coordinate squared error of `net` on `pilots` pushed through the
/// channel with a fixed noise draw per pilot.
fn selection_loss(net: &NeuralEqualizer, pilots: &PilotSet, channel: &ChannelConfig) -> Result<f64> {
    let mut total = 0.0;
    for i in 0..pilots.len() {
        let mut rng = stream_rng(channel.seed, VALIDATION_STREAM, i as u64);
        let (received, _) = transmit_real(pilots.x_row(i), channel, &mut rng)?;
        let out = net.forward(&received, pilots.x_layout())?;
        total += out.iter().zip(pilots.y_row(i)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total / (pilots.len() * pilots.m()) as f64)
}

/// Trains a neural aligner with channel noise (and fading, when enabled)
/// re-drawn on every forward pass; returns the best selected checkpoint.
pub fn train_neural(
    arch: NeuralArch,
    pilots: &PilotSet,
    channel: &ChannelConfig,
    cfg: &TrainConfig,
) -> Result<(NeuralEqualizer, TrainReport)> {
    if pilots.is_empty() {
        return Err(Error::EmptyPilotSet);
    }
    channel.validate()?;
    let mut init_rng = stream_rng(cfg.seed, 0x696e_6974, 0);
    let mut net = NeuralEqualizer::init_for(arch, pilots, &mut init_rng)?;

    let (train, selection_set, selection) = if pilots.len() >= cfg.min_pilots_for_validation {
        let n_val = ((pilots.len() as f64 * cfg.validation_fraction).floor() as usize).max(1);
        let (train, val) = pilots.split_at(pilots.len() - n_val);
        (train, val, Selection::Validation)
    } else {
        (pilots.clone(), pilots.clone(), Selection::Training)
    };
    let layout = train.x_layout();

    let mut params = net.params();
    let mut adam = Adam::new(params.len(), net.decayed());
    let mut best = net.clone();
    let mut best_loss = selection_loss(&net, &selection_set, channel)?;
    let mut report = TrainReport { selection, epochs_run: 0, best_epoch: 0, best_losses: vec![best_loss] };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut since_best = 0;
    let batch = cfg.batch_size.max(1);
    let mut grad = vec![0.0; params.len()];

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut stream_rng(cfg.seed, 0x7368_7566, epoch as u64));
        for chunk in order.chunks(batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &i in chunk {
                let mut rng = stream_rng(channel.seed, epoch as u64, i as u64);
                let (received, _) = transmit_real(train.x_row(i), channel, &mut rng)?;
                net.accumulate_gradient(&received, layout, train.y_row(i), &mut grad)?;
            }
            let scale = 1.0 / chunk.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut params, &grad, cfg);
            net.set_params(&params)?;
        }
        report.epochs_run = epoch;

        let loss = selection_loss(&net, &selection_set, channel)?;
        if loss < best_loss {
            best_loss = loss;
            best = net.clone();
            report.best_epoch = epoch;
            report.best_losses.push(loss);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    Ok((best, report))
}
