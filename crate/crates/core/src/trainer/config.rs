use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::agent::{DiscConfig, NoiseConfig, SupTerm, DEFAULT_LR};
use crate::data::replay::DEFAULT_CAPACITY;
use crate::data::AugMode;
use crate::env::EnvKind;
use crate::error::{Error, Result};
use crate::losses::ContrastConfig;
use crate::model::NetConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algo {
    Bc,
    Gail,
    GailSe,
    CailNoCal,
    Cail,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Bc => "bc",
            Algo::Gail => "gail",
            Algo::GailSe => "gail-se",
            Algo::CailNoCal => "cail-nocal",
            Algo::Cail => "cail",
        }
    }

    /// The unshared variant gives the discriminator its own encoder.
    pub fn separate_disc_encoder(self) -> bool {
        self == Algo::Gail
    }

    pub fn uses_contrast(self) -> bool {
        matches!(self, Algo::CailNoCal | Algo::Cail)
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "bc" => Algo::Bc,
            "gail" => Algo::Gail,
            "gail-se" => Algo::GailSe,
            "cail-nocal" => Algo::CailNoCal,
            "cail" => Algo::Cail,
            other => return Err(Error::Config(format!("unknown algo '{other}'"))),
        })
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Every hyperparameter of a run. Serialized as flat `key=value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub algo: Algo,
    pub env: EnvKind,
    pub seed: u64,
    pub total_steps: u64,
    pub batch_size: usize,
    pub gamma: f64,
    pub tau: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub alpha_start: f64,
    pub alpha_end: f64,
    pub sigma: f64,
    pub noise_clip: f64,
    pub ema: f64,
    pub lr: f64,
    pub capacity: usize,
    pub warmup: u64,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub ckpt_every: u64,
    /// `None` picks the algorithm's default (shift, or none for the GAIL
    /// variants).
    pub aug: Option<AugMode>,
    pub bc_epochs: u64,
    /// Log wall-clock steps per second. Off by default so metrics files are
    /// byte-reproducible.
    pub throughput: bool,
    pub net: NetConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            algo: Algo::Cail,
            env: EnvKind::Pendulum,
            seed: 0,
            total_steps: 60_000,
            batch_size: 64,
            gamma: 0.99,
            tau: 0.1,
            lambda1: 1.0,
            lambda2: 1.0,
            alpha_start: 0.3,
            alpha_end: 0.5,
            sigma: 0.2,
            noise_clip: 0.3,
            ema: 0.99,
            lr: DEFAULT_LR,
            capacity: DEFAULT_CAPACITY,
            warmup: 1_000,
            eval_every: 2_000,
            eval_episodes: 10,
            ckpt_every: 10_000,
            aug: None,
            bc_epochs: 200,
            throughput: false,
            net: NetConfig::default(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("invalid value '{value}' for {key}"))),
    }
}

/// Linear interpolation from `start` at step 0 to `end` at `total`.
pub fn alpha_schedule(step: u64, total: u64, start: f64, end: f64) -> f64 {
    if total == 0 {
        return end;
    }
    let step = step.min(total);
    start + (end - start) * step as f64 / total as f64
}

impl TrainConfig {
    pub const KEYS: &'static [&'static str] = &[
        "algo",
        "env",
        "seed",
        "total_steps",
        "batch_size",
        "gamma",
        "tau",
        "lambda1",
        "lambda2",
        "alpha_start",
        "alpha_end",
        "sigma",
        "noise_clip",
        "ema",
        "lr",
        "capacity",
        "warmup",
        "eval_every",
        "eval_episodes",
        "ckpt_every",
        "aug",
        "bc_epochs",
        "throughput",
        "conv_channels",
        "strides",
        "feature_dim",
        "disc_hidden",
        "proj_hidden",
        "proj_dim",
        "hidden",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "algo" => self.algo = value.parse()?,
            "env" => self.env = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            "total_steps" => self.total_steps = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "gamma" => self.gamma = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "lambda1" => self.lambda1 = parse(key, value)?,
            "lambda2" => self.lambda2 = parse(key, value)?,
            "alpha_start" => self.alpha_start = parse(key, value)?,
            "alpha_end" => self.alpha_end = parse(key, value)?,
            "sigma" => self.sigma = parse(key, value)?,
            "noise_clip" => self.noise_clip = parse(key, value)?,
            "ema" => self.ema = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "capacity" => self.capacity = parse(key, value)?,
            "warmup" => self.warmup = parse(key, value)?,
            "eval_every" => self.eval_every = parse(key, value)?,
            "eval_episodes" => self.eval_episodes = parse(key, value)?,
            "ckpt_every" => self.ckpt_every = parse(key, value)?,
            "aug" => {
                self.aug = match value {
                    "default" => None,
                    v => Some(v.parse()?),
                }
            }
            "bc_epochs" => self.bc_epochs = parse(key, value)?,
            "throughput" => self.throughput = parse_bool(key, value)?,
            "conv_channels" => self.net.conv_channels = parse(key, value)?,
            "strides" => {
                self.net.strides = value
                    .split(',')
                    .map(|s| parse(key, s.trim()))
                    .collect::<Result<_>>()?
            }
            "feature_dim" => self.net.feature_dim = parse(key, value)?,
            "disc_hidden" => self.net.disc_hidden = parse(key, value)?,
            "proj_hidden" => self.net.proj_hidden = parse(key, value)?,
            "proj_dim" => self.net.proj_dim = parse(key, value)?,
            "hidden" => self.net.hidden = parse(key, value)?,
            other => return Err(Error::Config(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", i + 1)))?;
            self.set(key.trim(), value)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    fn value_of(&self, key: &str) -> String {
        match key {
            "algo" => self.algo.to_string(),
            "env" => self.env.name().to_string(),
            "seed" => self.seed.to_string(),
            "total_steps" => self.total_steps.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "gamma" => self.gamma.to_string(),
            "tau" => self.tau.to_string(),
            "lambda1" => self.lambda1.to_string(),
            "lambda2" => self.lambda2.to_string(),
            "alpha_start" => self.alpha_start.to_string(),
            "alpha_end" => self.alpha_end.to_string(),
            "sigma" => self.sigma.to_string(),
            "noise_clip" => self.noise_clip.to_string(),
            "ema" => self.ema.to_string(),
            "lr" => self.lr.to_string(),
            "capacity" => self.capacity.to_string(),
            "warmup" => self.warmup.to_string(),
            "eval_every" => self.eval_every.to_string(),
            "eval_episodes" => self.eval_episodes.to_string(),
            "ckpt_every" => self.ckpt_every.to_string(),
            "aug" => self.aug_mode().name().to_string(),
            "bc_epochs" => self.bc_epochs.to_string(),
            "throughput" => self.throughput.to_string(),
            "conv_channels" => self.net.conv_channels.to_string(),
            "strides" => self
                .net
                .strides
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(","),
            "feature_dim" => self.net.feature_dim.to_string(),
            "disc_hidden" => self.net.disc_hidden.to_string(),
            "proj_hidden" => self.net.proj_hidden.to_string(),
            "proj_dim" => self.net.proj_dim.to_string(),
            "hidden" => self.net.hidden.to_string(),
            _ => unreachable!("every key in KEYS has a value"),
        }
    }

    /// The resolved configuration as `key=value` lines, one per key.
    pub fn echo(&self) -> String {
        Self::KEYS
            .iter()
            .map(|k| format!("{k}={}\n", self.value_of(k)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Config(msg.to_string()));
        if !(0.0 <= self.alpha_start && self.alpha_start <= self.alpha_end && self.alpha_end <= 1.0) {
            return bad("need 0 <= alpha_start <= alpha_end <= 1");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        if self.capacity == 0 || self.eval_every == 0 || self.eval_episodes == 0 || self.ckpt_every == 0 {
            return bad("counts must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.ema) {
            return bad("gamma and ema must lie in [0, 1]");
        }
        if !(self.sigma >= 0.0 && self.noise_clip > 0.0 && self.lr > 0.0) {
            return bad("sigma must be >= 0; noise_clip and lr must be positive");
        }
        self.contrast(self.alpha_start).validate()?;
        self.net.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Augmentation actually used: explicit setting, else shift for the
    /// contrastive variants and none for the GAIL variants.
    pub fn aug_mode(&self) -> AugMode {
        self.aug.unwrap_or(match self.algo {
            Algo::Gail | Algo::GailSe | Algo::Bc => AugMode::None,
            Algo::CailNoCal | Algo::Cail => AugMode::Shift,
        })
    }

    pub fn alpha_at(&self, step: u64) -> f64 {
        alpha_schedule(step, self.total_steps, self.alpha_start, self.alpha_end)
    }

    fn contrast(&self, alpha: f64) -> ContrastConfig {
        let (lambda1, lambda2) = if self.algo.uses_contrast() {
            (self.lambda1, self.lambda2)
        } else {
            (0.0, 0.0)
        };
        ContrastConfig {
            tau: self.tau,
            lambda1,
            lambda2,
            alpha,
        }
    }

    /// Discriminator objective of this algorithm at `step`.
    pub fn disc_config(&self, step: u64) -> DiscConfig {
        DiscConfig {
            contrast: self.contrast(self.alpha_at(step)),
            sup_term: match self.algo {
                Algo::CailNoCal => SupTerm::Plain,
                _ => SupTerm::Calibrated,
            },
            aug: match self.algo {
                // The unshared baseline never augments.
                Algo::Gail => AugMode::None,
                _ => self.aug_mode(),
            },
        }
    }

    pub fn noise(&self) -> NoiseConfig {
        NoiseConfig {
            sigma: self.sigma,
            clip: self.noise_clip,
        }
    }
}
