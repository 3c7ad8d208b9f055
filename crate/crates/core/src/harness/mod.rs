//! Experiment orchestration: configuration files, pilot-count and SNR
//! sweeps over seeds, and CSV reports.

pub mod config;
pub mod report;
pub mod sweep;

pub use config::{EqualizerKind, ExperimentConfig, FadingMode, KvConfig, Scenario};
pub use report::{emit_csv, SweepReport, SweepRow};
pub use sweep::{
    eval_channel, evaluate, evaluate_errors, fit_point, prepare_seed, run_grid, run_pilot_sweep, run_snr_sweep,
    EvalSummary, GridPoint, SeedData,
};
