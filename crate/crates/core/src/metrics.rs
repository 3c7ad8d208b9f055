//! Distortion metrics.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsnrConfig {
    /// Maximum pixel amplitude.
    pub peak: f64,
    /// Ceiling reported for (near-)zero MSE.
    pub cap_db: f64,
}

impl Default for PsnrConfig {
    fn default() -> Self {
        Self { peak: 1.0, cap_db: 100.0 }
    }
}

pub fn mse(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), actual: b.len() });
    }
    if a.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok(sum / a.len() as f64)
}

/// `10·log10(peak²/mse)`, clamped to `cap_db`.
pub fn psnr_from_mse(mse: f64, cfg: &PsnrConfig) -> f64 {
    if mse <= 0.0 {
        return cfg.cap_db;
    }
    let db = 10.0 * (cfg.peak * cfg.peak / mse).log10();
    db.min(cfg.cap_db)
}

pub fn psnr(a: &[f64], b: &[f64], cfg: &PsnrConfig) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mse_hand_values() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[0.0, 0.0], &[2.0, 0.0]).unwrap(), 2.0);
        assert!(matches!(mse(&[0.0], &[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn psnr_values() {
        let cfg = PsnrConfig::default();
        assert_eq!(psnr(&[0.5; 4], &[0.5; 4], &cfg).unwrap(), 100.0);
        assert!((psnr_from_mse(0.01, &cfg) - 20.0).abs() < 1e-12);
        let eight_bit = PsnrConfig { peak: 255.0, ..cfg };
        assert!((psnr_from_mse(1.0, &eight_bit) - 48.1308).abs() < 1e-3);
    }

    #[test]
    fn mse_matches_two_pass_oracle() {
        // independent route: mean of squares minus via pairwise (Kahan) sum
        let a: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.013).collect();
        let b: Vec<f64> = (0..1000).map(|i| ((i * 53) % 97) as f64 * 0.011).collect();
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for (x, y) in a.iter().zip(&b) {
            let t = (x - y).powi(2) - comp;
            let s = sum + t;
            comp = (s - sum) - t;
            sum = s;
        }
        let oracle = sum / a.len() as f64;
        let got = mse(&a, &b).unwrap();
        assert!((got - oracle).abs() <= 1e-12 * oracle);
    }

    proptest! {
        #[test]
        fn psnr_symmetric(a in prop::collection::vec(-1.0f64..1.0, 16), b in prop::collection::vec(-1.0f64..1.0, 16)) {
            let cfg = PsnrConfig::default();
            prop_assert_eq!(psnr(&a, &b, &cfg).unwrap(), psnr(&b, &a, &cfg).unwrap());
        }

        #[test]
        fn psnr_decreases_when_error_grows(
            a in prop::collection::vec(-1.0f64..1.0, 8),
            err in prop::collection::vec(0.01f64..1.0, 8),
            idx in 0usize..8,
            extra in 0.01f64..1.0,
        ) {
            let cfg = PsnrConfig::default();
            let b: Vec<f64> = a.iter().zip(&err).map(|(x, e)| x + e).collect();
            let mut c = b.clone();
            c[idx] += extra;
            prop_assert!(psnr(&a, &c, &cfg).unwrap() < psnr(&a, &b, &cfg).unwrap());
        }

        #[test]
        fn mse_scales_quadratically(
            a in prop::collection::vec(-10.0f64..10.0, 12),
            b in prop::collection::vec(-10.0f64..10.0, 12),
            alpha in 0.01f64..100.0,
        ) {
            let base = mse(&a, &b).unwrap();
            let sa: Vec<f64> = a.iter().map(|v| v * alpha).collect();
            let sb: Vec<f64> = b.iter().map(|v| v * alpha).collect();
            let scaled = mse(&sa, &sb).unwrap();
            prop_assert!((scaled - alpha * alpha * base).abs() <= 1e-12 * scaled.max(1e-300));
            prop_assert_eq!(mse(&a, &a).unwrap(), 0.0);
        }
    }
}
