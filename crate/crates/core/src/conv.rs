//! Stride-1, same-padding 2-D convolution over channel-major feature maps.

use crate::error::{Error, Result};
use crate::latents::Layout;

/// Weights laid out as `[c_out][c_in][k][k]`, plus one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2d {
    pub c_in: usize,
    pub c_out: usize,
    pub kernel: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Gradients of a [`Conv2d`] with respect to its parameters and its input.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2dGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub input: Vec<f64>,
}

impl Conv2d {
    pub fn zeros(c_in: usize, c_out: usize, kernel: usize) -> Self {
        assert!(kernel % 2 == 1, "odd kernel sizes only");
        Self { c_in, c_out, kernel, weight: vec![0.0; c_out * c_in * kernel * kernel], bias: vec![0.0; c_out] }
    }

    /// Centre tap 1 on the channel diagonal.
    pub fn delta(channels: usize, kernel: usize) -> Self {
        let mut conv = Self::zeros(channels, channels, kernel);
        let c = kernel / 2;
        for ch in 0..channels {
            *conv.w_mut(ch, ch, c, c) = 1.0;
        }
        conv
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    #[inline]
    fn w_idx(&self, o: usize, i: usize, ky: usize, kx: usize) -> usize {
        ((o * self.c_in + i) * self.kernel + ky) * self.kernel + kx
    }

    #[inline]
    pub fn w(&self, o: usize, i: usize, ky: usize, kx: usize) -> f64 {
        self.weight[self.w_idx(o, i, ky, kx)]
    }

    #[inline]
    pub fn w_mut(&mut self, o: usize, i: usize, ky: usize, kx: usize) -> &mut f64 {
        let idx = self.w_idx(o, i, ky, kx);
        &mut self.weight[idx]
    }

    fn check(&self, input: &[f64], layout: Layout) -> Result<()> {
        if layout.channels != self.c_in {
            return Err(Error::DimensionMismatch { expected: self.c_in, actual: layout.channels });
        }
        if input.len() != layout.len() {
            return Err(Error::DimensionMismatch { expected: layout.len(), actual: input.len() });
        }
        Ok(())
    }

    pub fn output_layout(&self, input: Layout) -> Layout {
        Layout::new(self.c_out, input.height, input.width)
    }

    pub fn forward(&self, input: &[f64], layout: Layout) -> Result<Vec<f64>> {
        self.check(input, layout)?;
        let (h, w) = (layout.height, layout.width);
        let pad = (self.kernel / 2) as isize;
        let mut out = vec![0.0; self.c_out * h * w];
        for o in 0..self.c_out {
            let plane = &mut out[o * h * w..(o + 1) * h * w];
            plane.iter_mut().for_each(|v| *v = self.bias[o]);
            for i in 0..self.c_in {
                let src = &input[i * h * w..(i + 1) * h * w];
                for ky in tap_range(self.kernel, h) {
                    let dy = ky as isize - pad;
                    for kx in tap_range(self.kernel, w) {
                        let wv = self.w(o, i, ky, kx);
                        if wv == 0.0 {
                            continue;
                        }
                        let dx = kx as isize - pad;
                        for y in 0..h {
                            let sy = y as isize + dy;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            let (x0, x1) = valid_range(w, dx);
                            let srow = sy as usize * w;
                            for x in x0..x1 {
                                plane[y * w + x] += wv * src[srow + (x as isize + dx) as usize];
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Backpropagates `grad_out` (same shape as the forward output).
    pub fn backward(&self, input: &[f64], layout: Layout, grad_out: &[f64]) -> Result<Conv2dGrad> {
        let mut g = Conv2dGrad {
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.c_out],
            input: vec![0.0; input.len()],
        };
        self.backward_accumulate(input, layout, grad_out, &mut g.weight, &mut g.bias, Some(&mut g.input))?;
        Ok(g)
    }

    /// Adds the parameter gradients into `gw`/`gb` and, when requested, the
    /// input gradient into `gi`.
    pub fn backward_accumulate(
        &self,
        input: &[f64],
        layout: Layout,
        grad_out: &[f64],
        gw: &mut [f64],
        gb: &mut [f64],
        mut gi: Option<&mut [f64]>,
    ) -> Result<()> {
        self.check(input, layout)?;
        let (h, w) = (layout.height, layout.width);
        if grad_out.len() != self.c_out * h * w {
            return Err(Error::DimensionMismatch { expected: self.c_out * h * w, actual: grad_out.len() });
        }
        if gw.len() != self.weight.len()
            || gb.len() != self.c_out
            || gi.as_ref().is_some_and(|g| g.len() != input.len())
        {
            return Err(Error::ShapeMismatch("gradient buffers do not match the layer".into()));
        }
        let pad = (self.kernel / 2) as isize;
        for o in 0..self.c_out {
            let go = &grad_out[o * h * w..(o + 1) * h * w];
            gb[o] += go.iter().sum::<f64>();
            for i in 0..self.c_in {
                let src = &input[i * h * w..(i + 1) * h * w];
                let mut gsrc = gi.as_deref_mut().map(|g| &mut g[i * h * w..(i + 1) * h * w]);
                for ky in tap_range(self.kernel, h) {
                    let dy = ky as isize - pad;
                    for kx in tap_range(self.kernel, w) {
                        let dx = kx as isize - pad;
                        let widx = self.w_idx(o, i, ky, kx);
                        let wv = self.weight[widx];
                        let mut acc = 0.0;
                        for y in 0..h {
                            let sy = y as isize + dy;
                            if sy < 0 || sy >= h as isize {
                                continue;
                            }
                            let (x0, x1) = valid_range(w, dx);
                            let srow = sy as usize * w;
                            for x in x0..x1 {
                                let s = srow + (x as isize + dx) as usize;
                                let g = go[y * w + x];
                                acc += g * src[s];
                                if let Some(gs) = gsrc.as_deref_mut() {
                                    gs[s] += g * wv;
                                }
                            }
                        }
                        gw[widx] += acc;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Kernel taps that touch at least one input pixel along an axis of length `n`.
#[inline]
fn tap_range(kernel: usize, n: usize) -> std::ops::Range<usize> {
    let pad = kernel / 2;
    let lo = pad.saturating_sub(n.saturating_sub(1));
    let hi = (pad + n).min(kernel);
    lo..hi
}

/// Output columns `x` for which `x + dx` stays inside `[0, w)`.
#[inline]
fn valid_range(w: usize, dx: isize) -> (usize, usize) {
    let x0 = if dx < 0 { (-dx) as usize } else { 0 };
    let x1 = if dx > 0 { w.saturating_sub(dx as usize) } else { w };
    (x0.min(w), x1)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Direct definition with explicit bounds checks, used as oracle.
    fn naive(conv: &Conv2d, input: &[f64], l: Layout) -> Vec<f64> {
        let pad = conv.kernel as isize / 2;
        let mut out = vec![0.0; conv.c_out * l.height * l.width];
        for o in 0..conv.c_out {
            for y in 0..l.height as isize {
                for x in 0..l.width as isize {
                    let mut s = conv.bias[o];
                    for i in 0..conv.c_in {
                        for ky in 0..conv.kernel as isize {
                            for kx in 0..conv.kernel as isize {
                                let (sy, sx) = (y + ky - pad, x + kx - pad);
                                if sy >= 0 && sx >= 0 && sy < l.height as isize && sx < l.width as isize {
                                    s += conv.w(o, i, ky as usize, kx as usize)
                                        * input[i * l.height * l.width + (sy as usize) * l.width + sx as usize];
                                }
                            }
                        }
                    }
                    out[o * l.height * l.width + (y as usize) * l.width + x as usize] = s;
                }
            }
        }
        out
    }

    #[test]
    fn matches_naive_definition() {
        for (h, w) in [(3, 6), (1, 1), (1, 2), (2, 1), (7, 3)] {
            check_against_naive(Layout::new(2, h, w));
        }
    }

    fn check_against_naive(l: Layout) {
        let mut conv = Conv2d::zeros(2, 3, 5);
        for (k, w) in conv.weight.iter_mut().enumerate() {
            *w = ((k * 7919) % 13) as f64 / 13.0 - 0.5;
        }
        conv.bias = vec![0.1, -0.2, 0.3];
        let input: Vec<f64> = (0..l.len()).map(|k| ((k * 31) % 11) as f64 - 5.0).collect();
        let got = conv.forward(&input, l).unwrap();
        let want = naive(&conv, &input, l);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_kernel_is_identity() {
        let l = Layout::new(3, 4, 4);
        let input: Vec<f64> = (0..l.len()).map(|k| k as f64).collect();
        assert_eq!(Conv2d::delta(3, 5).forward(&input, l).unwrap(), input);
    }

    #[test]
    fn rejects_wrong_channels() {
        let conv = Conv2d::zeros(2, 2, 5);
        assert!(conv.forward(&[0.0; 27], Layout::new(3, 3, 3)).is_err());
    }
}
