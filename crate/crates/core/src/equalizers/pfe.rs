use crate::error::{Error, Result};
use crate::numerics::{spd_inv_sqrt, Matrix};

/// Zero-shot Parseval frame equalizer.
///
/// Both ends hold encodings of the same ordered reference set: row `i` of
/// `tx_refs` (M×d) and of `rx_refs` (M×m) describe the same input. After
/// normalization `G = G̃(G̃ᵀG̃)^{-1/2}` and `F = F̃(F̃ᵀF̃)^{-1/2}` the TX sends
/// `c = G·x` and the RX reconstructs `ŷ = Fᵀ·c̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct PfeEqualizer {
    tx_refs: Matrix,
    rx_refs: Matrix,
    g: Matrix,
    f: Matrix,
}

fn normalize(refs: &Matrix) -> Result<Matrix> {
    if (0..refs.rows()).any(|r| refs.row(r).iter().all(|&v| v == 0.0)) {
        return Err(Error::DegenerateReferences);
    }
    let s = match spd_inv_sqrt(&refs.tgram()) {
        Err(Error::AllZero) => return Err(Error::DegenerateReferences),
        other => other?,
    };
    refs.matmul(&s)
}

/// Builds the analysis (`G`) and synthesis (`F`) operators.
pub fn build_pfe(tx_refs: &Matrix, rx_refs: &Matrix) -> Result<PfeEqualizer> {
    if tx_refs.rows() != rx_refs.rows() {
        return Err(Error::DimensionMismatch { expected: tx_refs.rows(), actual: rx_refs.rows() });
    }
    if tx_refs.rows() == 0 {
        return Err(Error::EmptyPilotSet);
    }
    let g = normalize(tx_refs)?;
    let f = normalize(rx_refs)?;
    Ok(PfeEqualizer { tx_refs: tx_refs.clone(), rx_refs: rx_refs.clone(), g, f })
}

impl PfeEqualizer {
    /// Number of frame coefficients `M`.
    pub fn frame_size(&self) -> usize {
        self.g.rows()
    }

    pub fn d(&self) -> usize {
        self.g.cols()
    }

    pub fn m(&self) -> usize {
        self.f.cols()
    }

    pub fn analysis(&self) -> &Matrix {
        &self.g
    }

    pub fn synthesis(&self) -> &Matrix {
        &self.f
    }

    pub fn tx_refs(&self) -> &Matrix {
        &self.tx_refs
    }

    pub fn rx_refs(&self) -> &Matrix {
        &self.rx_refs
    }

    /// TX pre-aligner `c = G·x`.
    pub fn analyze(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.g.matvec(x)
    }

    /// RX post-aligner `ŷ = Fᵀ·c̄`.
    pub fn synthesize(&self, c: &[f64]) -> Result<Vec<f64>> {
        self.f.tmatvec(c)
    }
}
