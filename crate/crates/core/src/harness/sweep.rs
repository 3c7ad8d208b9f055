use std::time::Instant;

use rayon::prelude::*;

use super::config::{EqualizerKind, ExperimentConfig, Scenario};
use super::report::{SweepReport, SweepRow};
use crate::channel::{draw_realization, stream_rng, stream_seed, transmit_real, ChannelConfig};
use crate::equalizers::{build_pfe, fit_linear, train_neural, Aligner, Equalizer, NoiseModel, TrainConfig};
use crate::error::{Error, Result};
use crate::latents::{generate_mismatch, CodecScenario, Layout, MismatchSpec, PilotSet, ToyCodec};
use crate::metrics::{mse, psnr_from_mse, PsnrConfig};
use crate::numerics::Matrix;

const FADING_STREAM: u64 = 0x6661_6465;
const EVAL_STREAM: u64 = 0x6576_616c;
const POINT_STREAM: u64 = 0x706f_696e;

/// Everything one seed needs: a permuted pilot pool and a held-out set.
#[derive(Debug, Clone)]
pub struct SeedData {
    pub seed: u64,
    /// Permuted once; every pilot count uses a prefix of it.
    pub pool: PilotSet,
    pub eval: PilotSet,
    /// Present for the codec scenario, where quality is measured on images.
    pub codec: Option<CodecScenario>,
}

impl SeedData {
    /// RX decoder and the source images behind `eval`, when there are any.
    pub fn image_target(&self) -> Option<(&ToyCodec, &Matrix)> {
        self.codec.as_ref().map(|c| (&c.rx.codec, &c.eval_images))
    }

    /// First `n` pilots, carrying fading coefficients when `fading` is set.
    /// Coefficients already in the pool are kept; missing ones are drawn
    /// from the seed and the pilot's position, so smaller sets stay
    /// prefixes of larger ones.
    pub fn pilots(&self, n: usize, fading: bool) -> Result<PilotSet> {
        let set = self.pool.prefix(n);
        if !fading {
            return Ok(set.without_fading());
        }
        if set.fading().is_some() {
            return Ok(set);
        }
        let cfg = ChannelConfig::noiseless().with_fading(true);
        let h = (0..set.len())
            .map(|i| draw_realization(&cfg, &mut stream_rng(self.seed, FADING_STREAM, i as u64)).h)
            .collect();
        set.with_fading(h)
    }
}

pub fn prepare_seed(cfg: &ExperimentConfig, seed: u64) -> Result<SeedData> {
    let pool_size = cfg.pool_size();
    match &cfg.scenario {
        Scenario::Mismatch { family, d, m, layout } => {
            let mut spec = MismatchSpec::new(*family, *d, *m, cfg.seed_tx, cfg.seed_rx).with_data_seed(seed);
            if let Some(l) = layout {
                spec = spec.with_layout(*l);
            }
            let data = generate_mismatch(&spec, pool_size, cfg.eval_count)?;
            Ok(SeedData { seed, pool: data.train.permuted(seed), eval: data.eval, codec: None })
        }
        Scenario::Codec { side, latent_dim } => {
            let sc =
                CodecScenario::build(*side, *latent_dim, pool_size, cfg.eval_count, cfg.seed_tx, cfg.seed_rx, seed)?;
            let pool = sc.pilots(&sc.train_images)?.permuted(seed);
            let eval = sc.pilots(&sc.eval_images)?;
            Ok(SeedData { seed, pool, eval, codec: Some(sc) })
        }
    }
}

/// One cell of the sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub equalizer: EqualizerKind,
    pub n_pilots: usize,
    pub snr_align_db: f64,
    pub snr_eval_db: f64,
    pub fading: bool,
}

impl GridPoint {
    fn describe(&self, seed: u64) -> String {
        format!(
            "{} N={} snr_align={} snr_eval={} fading={} seed={seed}",
            self.equalizer, self.n_pilots, self.snr_align_db, self.snr_eval_db, self.fading
        )
    }
}

/// Fits the aligner for `point` on the first `n_pilots` pilots of `data`.
/// `stream` seeds network initialization and the training noise.
pub fn fit_point(cfg: &ExperimentConfig, data: &SeedData, point: &GridPoint, stream: u64) -> Result<Equalizer> {
    let n = point.n_pilots;
    let align = ChannelConfig::awgn(point.snr_align_db).with_fading(point.fading).with_seed(stream);
    Ok(match point.equalizer {
        EqualizerKind::None => Equalizer::None,
        EqualizerKind::Linear => {
            let pilots = data.pilots(n, point.fading)?;
            Equalizer::Linear(fit_linear(&pilots, &NoiseModel::from_channel(&align))?)
        }
        EqualizerKind::Mlp | EqualizerKind::Cnn1 | EqualizerKind::Cnn2 => {
            let arch = point.equalizer.neural().expect("neural kind");
            let mut hyper = TrainConfig::for_arch(arch);
            hyper.max_epochs = cfg.max_epochs;
            hyper.patience = cfg.patience;
            hyper.batch_size = cfg.batch_size;
            hyper.seed = stream;
            Equalizer::Neural(train_neural(arch, &data.pilots(n, false)?, &align, &hyper)?.0)
        }
        EqualizerKind::Pfe => {
            let refs = data.pilots(n, false)?;
            Equalizer::Pfe(build_pfe(refs.x(), refs.y())?)
        }
        EqualizerKind::PfeFull => {
            let refs = data.pilots(data.pool.d(), false)?;
            Equalizer::Pfe(build_pfe(refs.x(), refs.y())?)
        }
    })
}

/// Mean per-vector PSNR and MSE of an aligner over a held-out set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalSummary {
    pub mean_psnr: f64,
    pub mean_mse: f64,
    pub count: usize,
}

/// Per-vector MSE of every held-out pair, `repeats` channel draws each.
///
/// With `image_target`, the aligned latent is decoded and compared with the
/// source image; otherwise it is compared with the RX latent directly.
/// Vector `i`, repeat `r` uses stream `(channel.seed, ·, i·repeats + r)`, so
/// two aligners evaluated on one channel seed see the same channel draws.
pub fn evaluate_errors(
    eq: &Equalizer,
    eval: &PilotSet,
    image_target: Option<(&ToyCodec, &Matrix)>,
    channel: &ChannelConfig,
    repeats: usize,
) -> Result<Vec<f64>> {
    channel.validate()?;
    let layout: Option<Layout> = eval.x_layout();
    let mut errors = Vec::with_capacity(eval.len() * repeats);
    for i in 0..eval.len() {
        let c = eq.pre(eval.x_row(i))?;
        for r in 0..repeats {
            let mut rng = stream_rng(channel.seed, EVAL_STREAM, (i * repeats + r) as u64);
            let (received, _) = transmit_real(&c, channel, &mut rng)?;
            let y_hat = eq.post(&received, layout)?;
            errors.push(match image_target {
                Some((decoder, images)) => mse(&decoder.decode(&y_hat)?, images.row(i))?,
                None => mse(&y_hat, eval.y_row(i))?,
            });
        }
    }
    Ok(errors)
}

pub fn evaluate(
    eq: &Equalizer,
    eval: &PilotSet,
    image_target: Option<(&ToyCodec, &Matrix)>,
    channel: &ChannelConfig,
    repeats: usize,
    psnr: &PsnrConfig,
) -> Result<EvalSummary> {
    if eval.is_empty() {
        return Err(Error::EmptyPilotSet);
    }
    let errors = evaluate_errors(eq, eval, image_target, channel, repeats)?;
    let n = errors.len() as f64;
    Ok(EvalSummary {
        mean_psnr: errors.iter().map(|&e| psnr_from_mse(e, psnr)).sum::<f64>() / n,
        mean_mse: errors.iter().sum::<f64>() / n,
        count: errors.len(),
    })
}

/// Channel used to score a point: every aligner and pilot count of one seed
/// shares the draws, which makes the comparisons paired.
pub fn eval_channel(seed: u64, point: &GridPoint) -> ChannelConfig {
    ChannelConfig::awgn(point.snr_eval_db).with_fading(point.fading).with_seed(stream_seed(
        seed,
        EVAL_STREAM,
        point.fading as u64,
    ))
}

fn run_point(cfg: &ExperimentConfig, data: &SeedData, point: &GridPoint, index: u64) -> Result<SweepRow> {
    let start = Instant::now();
    let eq = fit_point(cfg, data, point, stream_seed(data.seed, POINT_STREAM, index))?;
    let fit_wallclock = start.elapsed().as_secs_f64();
    let summary =
        evaluate(&eq, &data.eval, data.image_target(), &eval_channel(data.seed, point), cfg.eval_repeats, &cfg.psnr)?;
    Ok(SweepRow {
        equalizer: point.equalizer.name().to_string(),
        n_pilots: point.n_pilots,
        snr_align_db: point.snr_align_db,
        snr_eval_db: point.snr_eval_db,
        fading: point.fading,
        seed: Some(data.seed),
        mean_psnr: summary.mean_psnr,
        mean_mse: summary.mean_mse,
        fit_wallclock: Some(fit_wallclock),
    })
}

fn grid(cfg: &ExperimentConfig, pilot_grid: &[usize]) -> Vec<GridPoint> {
    let mut points = Vec::new();
    for fading in cfg.fading.variants() {
        for &snr_align_db in &cfg.snr_align_grid {
            for &equalizer in &cfg.equalizers {
                for &n_pilots in pilot_grid {
                    let snr_eval_db = cfg.snr_eval_db.unwrap_or(snr_align_db);
                    points.push(GridPoint { equalizer, n_pilots, snr_align_db, snr_eval_db, fading });
                }
            }
        }
    }
    points
}

/// Runs every grid point for every seed on a pool of `cfg.workers` threads.
/// Points that fail are listed in the report instead of aborting the rest.
pub fn run_grid(cfg: &ExperimentConfig, points: &[GridPoint]) -> Result<SweepReport> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {} workers: {e}", cfg.workers)))?;
    let (rows, failures) = pool.install(|| {
        let seeds: Vec<(u64, Result<SeedData>)> = cfg.seeds.par_iter().map(|&s| (s, prepare_seed(cfg, s))).collect();
        let tasks: Vec<(usize, usize)> =
            (0..seeds.len()).flat_map(|s| (0..points.len()).map(move |p| (s, p))).collect();
        let results: Vec<Result<SweepRow, String>> = tasks
            .par_iter()
            .map(|&(s, p)| {
                let (seed, data) = &seeds[s];
                let point = &points[p];
                let data = data.as_ref().map_err(|e| format!("{}: {e}", point.describe(*seed)))?;
                run_point(cfg, data, point, p as u64).map_err(|e| format!("{}: {e}", point.describe(*seed)))
            })
            .collect();
        let mut rows = Vec::new();
        let mut failures = Vec::new();
        for r in results {
            match r {
                Ok(row) => rows.push(row),
                Err(e) => failures.push(e),
            }
        }
        (rows, failures)
    });
    Ok(SweepReport::from_seed_rows(rows, failures))
}

/// PSNR against pilot count: one seeded permutation of the pilot pool per
/// seed, prefixes for every `N` in the grid.
pub fn run_pilot_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    run_grid(cfg, &grid(cfg, &cfg.pilot_grid))
}

/// PSNR against SNR_Align at the largest pilot count, for each configured
/// channel model.
pub fn run_snr_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let n = *cfg.pilot_grid.iter().max().expect("validated non-empty");
    run_grid(cfg, &grid(cfg, &[n]))
}
