//! Latent providers: synthetic mismatch generators, the affine toy codec
//! pair, pilot-set assembly and the SEQL tensor file format.

mod codec;
mod mismatch;
pub mod tensor;

pub use codec::{fit_toy_codec, toy_images, CodecScenario, ToyCodec, ToyCodecPair};
pub use mismatch::{generate_mismatch, MismatchData, MismatchFamily, MismatchMap, MismatchSpec};

use num_complex::Complex64;
use rand::seq::SliceRandom;

use crate::channel::stream_rng;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Channel-major `(channels, height, width)` arrangement of a flat latent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Layout {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Layout {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Self { channels, height, width }
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Same channel count at another spatial size.
    pub fn resized(&self, height: usize, width: usize) -> Self {
        Self { channels: self.channels, height, width }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentSample {
    pub vector: Vec<f64>,
    pub layout: Option<Layout>,
}

impl LatentSample {
    pub fn new(vector: Vec<f64>, layout: Option<Layout>) -> Result<Self> {
        if let Some(l) = layout {
            if l.len() != vector.len() {
                return Err(Error::DimensionMismatch { expected: l.len(), actual: vector.len() });
            }
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("latent"));
        }
        Ok(Self { vector, layout })
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// Ordered pilot pairs `(x_i, y_i)`, stored as the rows of two matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotSet {
    x: Matrix,
    y: Matrix,
    fading: Option<Vec<Complex64>>,
    x_layout: Option<Layout>,
    y_layout: Option<Layout>,
}

impl PilotSet {
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        if x.rows() != y.rows() {
            return Err(Error::DimensionMismatch { expected: x.rows(), actual: y.rows() });
        }
        Ok(Self { x, y, fading: None, x_layout: None, y_layout: None })
    }

    pub fn with_layouts(mut self, x_layout: Option<Layout>, y_layout: Option<Layout>) -> Result<Self> {
        if let Some(l) = x_layout {
            if l.len() != self.d() {
                return Err(Error::DimensionMismatch { expected: self.d(), actual: l.len() });
            }
        }
        if let Some(l) = y_layout {
            if l.len() != self.m() {
                return Err(Error::DimensionMismatch { expected: self.m(), actual: l.len() });
            }
        }
        self.x_layout = x_layout;
        self.y_layout = y_layout;
        Ok(self)
    }

    pub fn with_fading(mut self, fading: Vec<Complex64>) -> Result<Self> {
        if fading.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), actual: fading.len() });
        }
        self.fading = Some(fading);
        Ok(self)
    }

    pub fn without_fading(mut self) -> Self {
        self.fading = None;
        self
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn m(&self) -> usize {
        self.y.cols()
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn x_row(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }

    pub fn y_row(&self, i: usize) -> &[f64] {
        self.y.row(i)
    }

    pub fn fading(&self) -> Option<&[Complex64]> {
        self.fading.as_deref()
    }

    pub fn x_layout(&self) -> Option<Layout> {
        self.x_layout
    }

    pub fn y_layout(&self) -> Option<Layout> {
        self.y_layout
    }

    /// Rows `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> PilotSet {
        let pick = |m: &Matrix| {
            let mut data = Vec::with_capacity(indices.len() * m.cols());
            for &i in indices {
                data.extend_from_slice(m.row(i));
            }
            Matrix::new(indices.len(), m.cols(), data).expect("rows of a finite matrix")
        };
        PilotSet {
            x: pick(&self.x),
            y: pick(&self.y),
            fading: self.fading.as_ref().map(|f| indices.iter().map(|&i| f[i]).collect()),
            x_layout: self.x_layout,
            y_layout: self.y_layout,
        }
    }

    /// First `n` pairs (all of them if `n` exceeds the length).
    pub fn prefix(&self, n: usize) -> PilotSet {
        let idx: Vec<usize> = (0..n.min(self.len())).collect();
        self.select(&idx)
    }

    /// The seeded permutation used to draw incremental pilot subsets.
    pub fn permutation(len: usize, seed: u64) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..len).collect();
        idx.shuffle(&mut stream_rng(seed, 0x7065_726d, 0));
        idx
    }

    pub fn permuted(&self, seed: u64) -> PilotSet {
        self.select(&Self::permutation(self.len(), seed))
    }

    /// Splits into `(first n, rest)`.
    pub fn split_at(&self, n: usize) -> (PilotSet, PilotSet) {
        let n = n.min(self.len());
        let head: Vec<usize> = (0..n).collect();
        let tail: Vec<usize> = (n..self.len()).collect();
        (self.select(&head), self.select(&tail))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_set(n: usize) -> PilotSet {
        let x = Matrix::from_fn(n, 2, |r, c| (r * 2 + c) as f64);
        let y = Matrix::from_fn(n, 1, |r, _| r as f64);
        PilotSet::new(x, y).unwrap()
    }

    #[test]
    fn prefix_and_split_preserve_order() {
        let p = toy_set(6);
        let pre = p.prefix(3);
        assert_eq!(pre.y().as_slice(), &[0.0, 1.0, 2.0]);
        let (a, b) = p.split_at(4);
        assert_eq!(a.len() + b.len(), 6);
        assert_eq!(b.y().as_slice(), &[4.0, 5.0]);
    }

    #[test]
    fn permutation_is_reproducible() {
        assert_eq!(PilotSet::permutation(50, 42), PilotSet::permutation(50, 42));
        assert_ne!(PilotSet::permutation(50, 42), PilotSet::permutation(50, 43));
        let mut p = PilotSet::permutation(50, 7);
        p.sort_unstable();
        assert_eq!(p, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn fading_length_checked() {
        let p = toy_set(3);
        assert!(p.clone().with_fading(vec![Complex64::new(1.0, 0.0); 2]).is_err());
        let p = p.with_fading(vec![Complex64::new(1.0, 0.0); 3]).unwrap();
        assert_eq!(p.prefix(2).fading().unwrap().len(), 2);
    }

    #[test]
    fn layout_must_match() {
        assert!(LatentSample::new(vec![0.0; 12], Some(Layout::new(3, 2, 2))).is_ok());
        assert!(LatentSample::new(vec![0.0; 11], Some(Layout::new(3, 2, 2))).is_err());
        assert!(toy_set(2).with_layouts(Some(Layout::new(1, 1, 3)), None).is_err());
    }
}
