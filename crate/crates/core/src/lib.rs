//! Semantic channel equalization for mismatched latent spaces.
//!
//! A transmitter and a receiver run independently trained encoder/decoder
//! pairs, so a TX latent means nothing to the RX decoder until it has been
//! mapped across. This crate simulates the physical link (power
//! normalization, flat Rayleigh fading, AWGN) and provides three families of
//! aligners that undo the mismatch:
//!
//! * [`equalizers::LinearEqualizer`]: closed-form MMSE matrix fitted on pilots,
//! * [`equalizers::NeuralEqualizer`]: MLP and one/two-layer CNNs trained with noise in the loop,
//! * [`equalizers::PfeEqualizer`]: zero-shot Parseval frames built from shared reference encodings.
//!
//! The [`harness`] module runs seeded pilot-count and SNR sweeps and writes
//! CSV reports.

pub mod channel;
pub mod conv;
pub mod equalizers;
pub mod error;
pub mod harness;
pub mod latents;
pub mod metrics;
pub mod numerics;

pub use error::{Error, Result};
