//! Flat `key = value` experiment files.
//!
//! Blank lines and text after `#` are ignored. A key may appear more than
//! once; its values accumulate into a list. A value may also hold several
//! comma-separated items.
//!
//! ```text
//! scenario = codec
//! equalizer = linear
//! equalizer = pfe
//! pilots = 8, 32, 128
//! seed = 42
//! seed = 43
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::equalizers::NeuralArch;
use crate::error::{Error, Result};
use crate::latents::{Layout, MismatchFamily};
use crate::metrics::PsnrConfig;

/// Key/value pairs in file order, with repeated keys merged.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    entries: Vec<(String, Vec<String>)>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            cfg.push(key, value);
        }
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Appends the comma-separated items of `value` to `key`.
    pub fn push(&mut self, key: &str, value: &str) {
        let items = value.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty());
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some((_, v)) => v.extend(items),
            None => self.entries.push((key.to_string(), items.collect())),
        }
    }

    /// Replaces every value of `key`.
    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.retain(|(k, _)| k != key);
        self.push(key, value);
    }

    pub fn get(&self, key: &str) -> Option<&[String]> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }
}

/// One aligner column of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EqualizerKind {
    None,
    Linear,
    Mlp,
    Cnn1,
    Cnn2,
    /// Frame rows are the first `N` pilots.
    Pfe,
    /// Frame rows are the first `d` pilots of the pool, whatever `N` is.
    PfeFull,
}

impl EqualizerKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Linear => "linear",
            Self::Mlp => "mlp",
            Self::Cnn1 => "cnn1",
            Self::Cnn2 => "cnn2",
            Self::Pfe => "pfe",
            Self::PfeFull => "pfe-full",
        }
    }

    pub fn neural(self) -> Option<NeuralArch> {
        match self {
            Self::Mlp => Some(NeuralArch::Mlp),
            Self::Cnn1 => Some(NeuralArch::Cnn1),
            Self::Cnn2 => Some(NeuralArch::Cnn2),
            _ => None,
        }
    }
}

impl fmt::Display for EqualizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EqualizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "none" => Self::None,
            "linear" => Self::Linear,
            "mlp" => Self::Mlp,
            "cnn1" => Self::Cnn1,
            "cnn2" => Self::Cnn2,
            "pfe" => Self::Pfe,
            "pfe-full" => Self::PfeFull,
            other => return Err(Error::Config(format!("unknown equalizer `{other}`"))),
        })
    }
}

/// Where the latents come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    /// Synthetic latents pushed through a seeded mismatch map.
    Mismatch { family: MismatchFamily, d: usize, m: usize, layout: Option<Layout> },
    /// Procedural images through two PCA codecs fitted with different seeds.
    Codec { side: usize, latent_dim: usize },
}

impl Scenario {
    pub fn d(&self) -> usize {
        match self {
            Self::Mismatch { d, .. } => *d,
            Self::Codec { latent_dim, .. } => *latent_dim,
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Self::Mismatch { m, .. } => *m,
            Self::Codec { latent_dim, .. } => *latent_dim,
        }
    }

    fn has_layout(&self) -> bool {
        match self {
            Self::Mismatch { layout, .. } => layout.is_some(),
            Self::Codec { .. } => true,
        }
    }
}

/// Which channel models a sweep runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FadingMode {
    Off,
    On,
    Both,
}

impl FadingMode {
    pub fn variants(self) -> Vec<bool> {
        match self {
            Self::Off => vec![false],
            Self::On => vec![true],
            Self::Both => vec![false, true],
        }
    }
}

impl FromStr for FadingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "false" | "off" | "no" => Ok(Self::Off),
            "true" | "on" | "yes" => Ok(Self::On),
            "both" => Ok(Self::Both),
            other => Err(Error::Config(format!("fading must be true, false or both, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed_tx: u64,
    pub seed_rx: u64,
    pub equalizers: Vec<EqualizerKind>,
    pub pilot_grid: Vec<usize>,
    /// Pilots drawn per seed before permutation; defaults to the largest grid value.
    pub pilot_pool: Option<usize>,
    /// SNR the codecs were trained at. The desk-scale codecs are noise-free,
    /// so this is carried into reports only.
    pub snr_djscc_db: f64,
    pub snr_align_grid: Vec<f64>,
    /// Evaluation SNR; `None` ties it to each SNR_Align value.
    pub snr_eval_db: Option<f64>,
    pub fading: FadingMode,
    pub seeds: Vec<u64>,
    pub eval_count: usize,
    /// Independent channel draws per evaluation vector.
    pub eval_repeats: usize,
    /// Worker threads; 0 picks the number of CPUs.
    pub workers: usize,
    pub output: Option<PathBuf>,
    /// Adds the fit wall-clock column, which breaks byte-identical reruns.
    pub timing: bool,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub psnr: PsnrConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Codec { side: 12, latent_dim: 48 },
            seed_tx: 42,
            seed_rx: 43,
            equalizers: vec![EqualizerKind::None, EqualizerKind::Linear, EqualizerKind::Pfe],
            pilot_grid: vec![8, 32, 128, 512, 1000],
            pilot_pool: None,
            snr_djscc_db: -10.0,
            snr_align_grid: vec![10.0],
            snr_eval_db: None,
            fading: FadingMode::Off,
            seeds: vec![42, 43, 44, 45, 46],
            eval_count: 2000,
            eval_repeats: 1,
            workers: 0,
            output: None,
            timing: false,
            max_epochs: 2000,
            patience: 20,
            batch_size: 64,
            psnr: PsnrConfig::default(),
        }
    }
}

fn parse_one<T: FromStr>(key: &str, values: &[String]) -> Result<T> {
    match values {
        [v] => parse_item(key, v),
        _ => Err(Error::Config(format!("`{key}` takes exactly one value, got {}", values.len()))),
    }
}

fn parse_item<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_list<T: FromStr>(key: &str, values: &[String]) -> Result<Vec<T>> {
    values.iter().map(|v| parse_item(key, v)).collect()
}

/// Accepts `inf` for a noiseless channel.
fn parse_db(key: &str, v: &str) -> Result<f64> {
    match v {
        "inf" | "+inf" => Ok(f64::INFINITY),
        _ => {
            let x: f64 = parse_item(key, v)?;
            if x.is_finite() {
                Ok(x)
            } else {
                Err(Error::Config(format!("`{key}`: `{v}` is not a valid SNR")))
            }
        }
    }
}

impl ExperimentConfig {
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply(kv)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_kv(&KvConfig::read(path)?)
    }

    /// Overrides fields from `kv`; later calls win. Scenario keys are
    /// resolved together, so `scenario`, `family`, `d`, `m`, `channels`,
    /// `height`, `width`, `image_side` and `latent_dim` may come in any order.
    pub fn apply(&mut self, kv: &KvConfig) -> Result<()> {
        let known = [
            "scenario",
            "family",
            "d",
            "m",
            "channels",
            "height",
            "width",
            "image_side",
            "latent_dim",
            "seed_tx",
            "seed_rx",
            "equalizer",
            "pilots",
            "pilot_pool",
            "snr_djscc",
            "snr_align",
            "snr_eval",
            "fading",
            "seed",
            "eval_count",
            "eval_repeats",
            "workers",
            "output",
            "timing",
            "max_epochs",
            "patience",
            "batch_size",
            "psnr_peak",
            "psnr_cap",
        ];
        for (key, _) in kv.iter() {
            if !known.contains(&key) {
                return Err(Error::Config(format!("unknown key `{key}`")));
            }
        }
        self.apply_scenario(kv)?;
        for (key, values) in kv.iter() {
            match key {
                "seed_tx" => self.seed_tx = parse_one(key, values)?,
                "seed_rx" => self.seed_rx = parse_one(key, values)?,
                "equalizer" => self.equalizers = parse_list(key, values)?,
                "pilots" => self.pilot_grid = parse_list(key, values)?,
                "pilot_pool" => self.pilot_pool = Some(parse_one(key, values)?),
                "snr_djscc" => self.snr_djscc_db = parse_db(key, &single(key, values)?)?,
                "snr_align" => self.snr_align_grid = values.iter().map(|v| parse_db(key, v)).collect::<Result<_>>()?,
                "snr_eval" => {
                    let v = single(key, values)?;
                    self.snr_eval_db = if v == "tied" { None } else { Some(parse_db(key, &v)?) };
                }
                "fading" => self.fading = parse_one(key, values)?,
                "seed" => self.seeds = parse_list(key, values)?,
                "eval_count" => self.eval_count = parse_one(key, values)?,
                "eval_repeats" => self.eval_repeats = parse_one(key, values)?,
                "workers" => self.workers = parse_one(key, values)?,
                "output" => self.output = Some(PathBuf::from(single(key, values)?)),
                "timing" => self.timing = parse_one(key, values)?,
                "max_epochs" => self.max_epochs = parse_one(key, values)?,
                "patience" => self.patience = parse_one(key, values)?,
                "batch_size" => self.batch_size = parse_one(key, values)?,
                "psnr_peak" => self.psnr.peak = parse_one(key, values)?,
                "psnr_cap" => self.psnr.cap_db = parse_one(key, values)?,
                _ => {}
            }
        }
        Ok(())
    }

    fn apply_scenario(&mut self, kv: &KvConfig) -> Result<()> {
        let get = |k: &str| kv.get(k).map(|v| parse_one::<usize>(k, v)).transpose();
        let kind = match kv.get("scenario") {
            Some(v) => single("scenario", v)?,
            None => match self.scenario {
                Scenario::Mismatch { .. } => "mismatch".into(),
                Scenario::Codec { .. } => "codec".into(),
            },
        };
        self.scenario = match kind.as_str() {
            "codec" => {
                let (old_side, old_d) = match self.scenario {
                    Scenario::Codec { side, latent_dim } => (side, Some(latent_dim)),
                    _ => (12, None),
                };
                let side = get("image_side")?.unwrap_or(old_side);
                // without an explicit size, keep ρ = (d/2)/n = 1/6
                let latent_dim = match (get("latent_dim")?, old_d) {
                    (Some(d), _) => d,
                    (None, Some(d)) if kv.get("image_side").is_none() => d,
                    _ => side * side / 3,
                };
                Scenario::Codec { side, latent_dim }
            }
            "mismatch" => {
                let (mut family, mut d, mut m, mut layout) = match &self.scenario {
                    Scenario::Mismatch { family, d, m, layout } => (*family, *d, *m, *layout),
                    _ => (MismatchFamily::Orthogonal, 16, 16, None),
                };
                if let Some(v) = kv.get("family") {
                    family = parse_one("family", v)?;
                }
                let (c, h, w) = (get("channels")?, get("height")?, get("width")?);
                match (c, h, w) {
                    (None, None, None) => {}
                    (Some(c), Some(h), Some(w)) => {
                        let l = Layout::new(c, h, w);
                        layout = Some(l);
                        d = l.len();
                        m = l.len();
                    }
                    _ => return Err(Error::Config("`channels`, `height` and `width` go together".into())),
                }
                if let Some(v) = get("d")? {
                    d = v;
                    if layout.is_some_and(|l| l.len() != v) {
                        return Err(Error::Config(format!("d = {v} disagrees with the latent layout")));
                    }
                    if kv.get("m").is_none() {
                        m = v;
                    }
                }
                if let Some(v) = get("m")? {
                    m = v;
                }
                Scenario::Mismatch { family, d, m, layout }
            }
            other => return Err(Error::Config(format!("unknown scenario `{other}`"))),
        };
        Ok(())
    }

    pub fn pool_size(&self) -> usize {
        let largest = self.pilot_grid.iter().copied().max().unwrap_or(0);
        let mut pool = self.pilot_pool.unwrap_or(largest).max(largest);
        if self.equalizers.contains(&EqualizerKind::PfeFull) || matches!(self.scenario, Scenario::Codec { .. }) {
            pool = pool.max(self.scenario.d());
        }
        pool
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.equalizers.is_empty() {
            return bad("no equalizers requested".into());
        }
        if self.pilot_grid.is_empty() || self.pilot_grid.contains(&0) {
            return bad("pilot grid must be non-empty and positive".into());
        }
        if self.snr_align_grid.is_empty() {
            return bad("SNR_Align grid is empty".into());
        }
        if self.seeds.is_empty() {
            return bad("no seeds".into());
        }
        let mut seeds = self.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return bad("seeds must be distinct".into());
        }
        if self.eval_count == 0 || self.eval_repeats == 0 {
            return bad("evaluation needs at least one vector and one repeat".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.psnr.peak.is_nan() || self.psnr.peak <= 0.0 {
            return bad("psnr_peak must be positive".into());
        }
        let (d, m) = (self.scenario.d(), self.scenario.m());
        if d == 0 || m == 0 || d % 2 != 0 {
            return bad(format!("latent size {d} must be positive and even, m = {m} positive"));
        }
        match &self.scenario {
            Scenario::Codec { side, latent_dim } => {
                if *latent_dim > side * side {
                    return bad(format!("latent_dim {latent_dim} exceeds {} pixels", side * side));
                }
            }
            Scenario::Mismatch { family, layout, .. } => {
                if *family == MismatchFamily::ConvLocal && layout.is_none() {
                    return bad("conv-local mismatch needs `channels`, `height` and `width`".into());
                }
                let square = matches!(
                    family,
                    MismatchFamily::Orthogonal | MismatchFamily::Permutation | MismatchFamily::ConvLocal
                );
                if square && d != m {
                    return bad(format!("{family} mismatch needs d = m, got {d} and {m}"));
                }
            }
        }
        for eq in &self.equalizers {
            match eq {
                EqualizerKind::None if d != m => return bad("the unaligned baseline needs d = m".into()),
                EqualizerKind::Cnn1 | EqualizerKind::Cnn2 if !self.scenario.has_layout() => {
                    return bad(format!("{eq} needs a latent layout"))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

fn single(key: &str, values: &[String]) -> Result<String> {
    match values {
        [v] => Ok(v.clone()),
        _ => Err(Error::Config(format!("`{key}` takes exactly one value, got {}", values.len()))),
    }
}
