use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use semeq::equalizers::io::{load_equalizer, save_equalizer};
use semeq::equalizers::{count_params, ParamDims};
use semeq::harness::{
    eval_channel, evaluate, fit_point, prepare_seed, run_pilot_sweep, run_snr_sweep, ExperimentConfig, GridPoint,
    KvConfig, SeedData, SweepReport,
};
use semeq::latents::tensor::{read_pilot_set, write_pilot_set};
use semeq::{Error, Result};

#[derive(Parser)]
#[command(name = "semeq", version, about = "Semantic channel equalization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the pilot pool and held-out set of the first seed as SEQL files.
    Gen {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Fit one equalizer and save it.
    Fit {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Pilot-set file to fit on instead of generated pilots.
        #[arg(long)]
        pilot_file: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a saved equalizer against the channel.
    Eval {
        #[command(flatten)]
        exp: ExperimentArgs,
        #[arg(long)]
        model: PathBuf,
        /// Held-out pilot-set file to score on instead of generated data.
        #[arg(long)]
        eval_file: Option<PathBuf>,
    },
    /// PSNR against pilot count.
    SweepPilots {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// PSNR against SNR_Align.
    SweepSnr {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Print parameter counts of every aligner.
    Params {
        #[arg(long, default_value_t = 9216)]
        d: usize,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long, default_value_t = 16)]
        channels: usize,
        #[arg(long)]
        channels_out: Option<usize>,
    },
}

/// Flags mirror the keys of the configuration file and override it.
#[derive(Args, Default)]
struct ExperimentArgs {
    /// Key-value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// `mismatch` or `codec`.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    channels: Option<String>,
    #[arg(long)]
    height: Option<String>,
    #[arg(long)]
    width: Option<String>,
    #[arg(long)]
    image_side: Option<String>,
    #[arg(long)]
    latent_dim: Option<String>,
    #[arg(long)]
    seed_tx: Option<String>,
    #[arg(long)]
    seed_rx: Option<String>,
    #[arg(long, value_delimiter = ',')]
    equalizer: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    pilots: Vec<String>,
    #[arg(long)]
    pilot_pool: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    snr_djscc: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    snr_align: Vec<String>,
    #[arg(long, allow_hyphen_values = true)]
    snr_eval: Option<String>,
    /// `true`, `false` or `both`.
    #[arg(long)]
    fading: Option<String>,
    #[arg(long, value_delimiter = ',')]
    seed: Vec<String>,
    #[arg(long)]
    eval_count: Option<String>,
    #[arg(long)]
    eval_repeats: Option<String>,
    #[arg(long)]
    workers: Option<String>,
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    timing: Option<String>,
    #[arg(long)]
    max_epochs: Option<String>,
    #[arg(long)]
    patience: Option<String>,
    #[arg(long)]
    batch_size: Option<String>,
    #[arg(long)]
    psnr_peak: Option<String>,
    #[arg(long)]
    psnr_cap: Option<String>,
}

impl ExperimentArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut kv = match &self.config {
            Some(p) => KvConfig::read(p)?,
            None => KvConfig::default(),
        };
        let singles = [
            ("scenario", &self.scenario),
            ("family", &self.family),
            ("d", &self.d),
            ("m", &self.m),
            ("channels", &self.channels),
            ("height", &self.height),
            ("width", &self.width),
            ("image_side", &self.image_side),
            ("latent_dim", &self.latent_dim),
            ("seed_tx", &self.seed_tx),
            ("seed_rx", &self.seed_rx),
            ("pilot_pool", &self.pilot_pool),
            ("snr_djscc", &self.snr_djscc),
            ("snr_eval", &self.snr_eval),
            ("fading", &self.fading),
            ("eval_count", &self.eval_count),
            ("eval_repeats", &self.eval_repeats),
            ("workers", &self.workers),
            ("output", &self.output),
            ("timing", &self.timing),
            ("max_epochs", &self.max_epochs),
            ("patience", &self.patience),
            ("batch_size", &self.batch_size),
            ("psnr_peak", &self.psnr_peak),
            ("psnr_cap", &self.psnr_cap),
        ];
        for (key, value) in singles {
            if let Some(v) = value {
                kv.set(key, v);
            }
        }
        let lists = [
            ("equalizer", &self.equalizer),
            ("pilots", &self.pilots),
            ("snr_align", &self.snr_align),
            ("seed", &self.seed),
        ];
        for (key, values) in lists {
            if !values.is_empty() {
                kv.set(key, &values.join(","));
            }
        }
        ExperimentConfig::from_kv(&kv)
    }
}

/// The single grid point a `fit` or `eval` call refers to.
fn single_point(cfg: &ExperimentConfig) -> Result<GridPoint> {
    let [equalizer] = cfg.equalizers[..] else {
        return Err(Error::Config(format!("expected one equalizer, got {}", cfg.equalizers.len())));
    };
    let n_pilots = *cfg.pilot_grid.iter().max().expect("validated");
    let snr_align_db = cfg.snr_align_grid[0];
    let fading = match cfg.fading.variants()[..] {
        [f] => f,
        _ => return Err(Error::Config("fit and eval take fading = true or false".into())),
    };
    Ok(GridPoint { equalizer, n_pilots, snr_align_db, snr_eval_db: cfg.snr_eval_db.unwrap_or(snr_align_db), fading })
}

fn first_seed(cfg: &ExperimentConfig) -> u64 {
    cfg.seeds[0]
}

fn gen(exp: &ExperimentArgs, out_dir: &Path) -> Result<()> {
    let cfg = exp.load()?;
    let data = prepare_seed(&cfg, first_seed(&cfg))?;
    std::fs::create_dir_all(out_dir)?;
    let fading = cfg.fading.variants().contains(&true);
    let pilots = data.pilots(data.pool.len(), fading)?;
    write_pilot_set(out_dir.join("pilots.seql"), &pilots)?;
    write_pilot_set(out_dir.join("eval.seql"), &data.eval)?;
    println!("wrote {} pilots and {} held-out pairs to {}", pilots.len(), data.eval.len(), out_dir.display());
    Ok(())
}

fn fit(exp: &ExperimentArgs, pilot_file: Option<&Path>, out: &Path) -> Result<()> {
    let cfg = exp.load()?;
    let point = single_point(&cfg)?;
    let seed = first_seed(&cfg);
    let data = match pilot_file {
        Some(p) => {
            let pool = read_pilot_set(p)?;
            SeedData { seed, eval: pool.prefix(0), pool, codec: None }
        }
        None => prepare_seed(&cfg, seed)?,
    };
    let eq = fit_point(&cfg, &data, &point, seed)?;
    let meta = vec![
        ("equalizer".to_string(), point.equalizer.to_string()),
        ("n_pilots".to_string(), data.pool.len().min(point.n_pilots).to_string()),
        ("snr_align_db".to_string(), point.snr_align_db.to_string()),
        ("fading".to_string(), point.fading.to_string()),
        ("seed".to_string(), seed.to_string()),
    ];
    save_equalizer(out, &eq, &meta)?;
    println!("saved {} equalizer to {}", eq.kind(), out.display());
    Ok(())
}

fn eval(exp: &ExperimentArgs, model: &Path, eval_file: Option<&Path>) -> Result<()> {
    let cfg = exp.load()?;
    let (eq, _) = load_equalizer(model)?;
    let mut point = single_point(&cfg).unwrap_or(GridPoint {
        equalizer: cfg.equalizers[0],
        n_pilots: 0,
        snr_align_db: cfg.snr_align_grid[0],
        snr_eval_db: cfg.snr_eval_db.unwrap_or(cfg.snr_align_grid[0]),
        fading: false,
    });
    point.fading = cfg.fading.variants().contains(&true);
    let seed = first_seed(&cfg);
    let channel = eval_channel(seed, &point);
    let summary = match eval_file {
        Some(p) => evaluate(&eq, &read_pilot_set(p)?, None, &channel, cfg.eval_repeats, &cfg.psnr)?,
        None => {
            let data = prepare_seed(&cfg, seed)?;
            evaluate(&eq, &data.eval, data.image_target(), &channel, cfg.eval_repeats, &cfg.psnr)?
        }
    };
    println!(
        "equalizer={} snr_eval_db={} fading={} vectors={} mean_psnr_db={:.6} mean_mse={:.6e}",
        eq.kind(),
        point.snr_eval_db,
        point.fading,
        summary.count,
        summary.mean_psnr,
        summary.mean_mse
    );
    Ok(())
}

fn sweep(exp: &ExperimentArgs, snr: bool) -> Result<()> {
    let cfg = exp.load()?;
    let report: SweepReport = if snr { run_snr_sweep(&cfg)? } else { run_pilot_sweep(&cfg)? };
    if !report.rows.is_empty() {
        match &cfg.output {
            Some(p) => semeq::harness::emit_csv(&report, p, cfg.timing)?,
            None => report.write_csv(std::io::stdout().lock(), cfg.timing)?,
        }
    }
    if report.is_complete() {
        Ok(())
    } else {
        for f in &report.failures {
            eprintln!("failed: {f}");
        }
        Err(Error::InsufficientData(format!("{} grid points failed", report.failures.len())))
    }
}

fn params(d: usize, m: Option<usize>, channels: usize, channels_out: Option<usize>) -> Result<()> {
    let m = m.unwrap_or(d);
    let c_out = channels_out.unwrap_or(channels);
    let rows = [
        ("linear", format!("d={d} m={m}"), ParamDims::Linear { d, m }),
        ("mlp", format!("d={d} h={d} m={m}"), ParamDims::Mlp { d, m }),
        ("cnn1", format!("c_in={channels} c_out={c_out} kernel=5"), ParamDims::Cnn1 { c_in: channels, c_out }),
        ("cnn2", format!("c_in={channels} c_out={c_out} kernel=5"), ParamDims::Cnn2 { c_in: channels, c_out }),
    ];
    let mut out = std::io::stdout().lock();
    writeln!(out, "{:<8} {:<32} {:>14}", "aligner", "dims", "parameters")?;
    for (name, dims, p) in rows {
        writeln!(out, "{name:<8} {dims:<32} {:>14}", group_thousands(count_params(&p)))?;
    }
    Ok(())
}

fn group_thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen { exp, out_dir } => gen(&exp, &out_dir),
        Command::Fit { exp, pilot_file, out } => fit(&exp, pilot_file.as_deref(), &out),
        Command::Eval { exp, model, eval_file } => eval(&exp, &model, eval_file.as_deref()),
        Command::SweepPilots { exp } => sweep(&exp, false),
        Command::SweepSnr { exp } => sweep(&exp, true),
        Command::Params { d, m, channels, channels_out } => params(d, m, channels, channels_out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
