use crate::channel::{apply_fading_real, ChannelConfig};
use crate::error::{Error, Result};
use crate::latents::PilotSet;
use crate::numerics::{spd_solve, Matrix, SymmetricEigen};

/// Jitter added (relative to the largest eigenvalue) when the regularized
/// normal equations are singular.
pub const JITTER: f64 = 1e-10;

/// Real-domain channel noise seen by the post-aligner: `Σ̃_v = σ²·I` with
/// `σ² = σ_v²/2` per real dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub real_variance: f64,
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self { real_variance: 0.0 }
    }

    pub fn from_channel(cfg: &ChannelConfig) -> Self {
        Self { real_variance: cfg.real_noise_variance() }
    }
}

/// Post-aligner `ŷ = F·x̄` with `F ∈ ℝ^{m×d}` and no bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEqualizer {
    f: Matrix,
    rank_deficient: bool,
}

impl LinearEqualizer {
    pub fn from_matrix(f: Matrix) -> Self {
        Self { f, rank_deficient: false }
    }

    pub fn with_rank_deficient(mut self, flag: bool) -> Self {
        self.rank_deficient = flag;
        self
    }

    pub fn matrix(&self) -> &Matrix {
        &self.f
    }

    pub fn d(&self) -> usize {
        self.f.cols()
    }

    pub fn m(&self) -> usize {
        self.f.rows()
    }

    /// Set when the fit had to add jitter to singular normal equations.
    pub fn rank_deficient(&self) -> bool {
        self.rank_deficient
    }

    pub fn apply(&self, received: &[f64]) -> Result<Vec<f64>> {
        self.f.matvec(received)
    }
}

/// Columns of `X̃` as rows: each pilot latent multiplied by its fading
/// coefficient (when the pilot set carries one).
pub fn faded_latents(pilots: &PilotSet) -> Result<Matrix> {
    match pilots.fading() {
        None => Ok(pilots.x().clone()),
        Some(h) => {
            let rows =
                (0..pilots.len()).map(|i| apply_fading_real(pilots.x_row(i), h[i])).collect::<Result<Vec<_>>>()?;
            Matrix::from_rows(&rows)
        }
    }
}

/// Closed-form minimizer of `(1/N)‖Y − F·X̃‖²_F + tr(F·Σ̃_v·Fᵀ)`:
/// `F = Y·X̃ᵀ·(X̃·X̃ᵀ + N·Σ̃_v)⁻¹`.
pub fn fit_linear(pilots: &PilotSet, noise: &NoiseModel) -> Result<LinearEqualizer> {
    if pilots.is_empty() {
        return Err(Error::EmptyPilotSet);
    }
    let n = pilots.len() as f64;
    let xt = faded_latents(pilots)?; // N×d
    let mut normal = xt.tgram(); // X̃·X̃ᵀ, d×d
    normal.add_diagonal(n * noise.real_variance);
    let rhs = xt.transpose().matmul(pilots.y())?; // X̃·Yᵀ, d×m

    let (ft, rank_deficient) = match spd_solve(&normal, &rhs) {
        Ok(sol) => (sol, false),
        Err(Error::NotPositiveDefinite) => {
            let lmax = SymmetricEigen::new(&normal)?.max_value();
            if lmax <= 0.0 {
                // all pilots are zero: the best map is zero
                return Ok(LinearEqualizer { f: Matrix::zeros(pilots.m(), pilots.d()), rank_deficient: true });
            }
            normal.add_diagonal(JITTER * lmax);
            (spd_solve(&normal, &rhs)?, true)
        }
        Err(e) => return Err(e),
    };
    Ok(LinearEqualizer { f: ft.transpose(), rank_deficient })
}

/// Empirical objective `(1/N)‖Y − F·X̃‖²_F + σ²‖F‖²_F`.
pub fn linear_objective(f: &Matrix, pilots: &PilotSet, noise: &NoiseModel) -> Result<f64> {
    if f.shape() != (pilots.m(), pilots.d()) {
        return Err(Error::ShapeMismatch(format!("F is {:?}, pilots need {}x{}", f.shape(), pilots.m(), pilots.d())));
    }
    let xt = faded_latents(pilots)?;
    let mut fit = 0.0;
    for i in 0..pilots.len() {
        let pred = f.matvec(xt.row(i))?;
        fit += pred.iter().zip(pilots.y_row(i)).map(|(p, y)| (y - p) * (y - p)).sum::<f64>();
    }
    let reg = noise.real_variance * f.as_slice().iter().map(|v| v * v).sum::<f64>();
    Ok(fit / pilots.len() as f64 + reg)
}
