use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{NashError, Result};
use crate::model::{Architecture, Binarization, NoiseMode, Objective};

pub const CODE_LENGTHS: [usize; 5] = [8, 16, 32, 64, 128];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    None,
    Fixed,
    DataDependent,
}

impl FromStr for NoiseKind {
    type Err = NashError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(NoiseKind::None),
            "fixed" => Ok(NoiseKind::Fixed),
            "data-dependent" => Ok(NoiseKind::DataDependent),
            _ => Err(NashError::Config(format!(
                "unknown noise mode `{s}` (expected none, fixed or data-dependent)"
            ))),
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::None => "none",
            NoiseKind::Fixed => "fixed",
            NoiseKind::DataDependent => "data-dependent",
        })
    }
}

impl FromStr for Binarization {
    type Err = NashError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "deterministic" => Ok(Binarization::Deterministic),
            "stochastic" => Ok(Binarization::Stochastic),
            "identity" => Ok(Binarization::Identity),
            _ => Err(NashError::Config(format!(
                "unknown binarization `{s}` (expected deterministic, stochastic or identity)"
            ))),
        }
    }
}

impl fmt::Display for Binarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Binarization::Deterministic => "deterministic",
            Binarization::Stochastic => "stochastic",
            Binarization::Identity => "identity",
        })
    }
}

/// Every knob of a training run. Serialized as flat `key=value` lines.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub bits: usize,
    pub binarization: Binarization,
    pub noise: NoiseKind,
    pub sigma: f64,
    pub gamma: f64,
    pub supervised: bool,
    pub alpha: f64,
    pub learning_rate: f64,
    pub decay_rate: f64,
    pub decay_steps: u64,
    pub dropout_keep: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub encoder_hidden: Vec<usize>,
    pub decoder_hidden: Vec<usize>,
    pub classifier_hidden: Vec<usize>,
    /// Documents per gradient work unit. Fixes the summation order, so it is
    /// part of the result; the thread count is not.
    pub chunk_size: usize,
    pub eval_k: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            bits: 16,
            binarization: Binarization::Stochastic,
            noise: NoiseKind::DataDependent,
            sigma: 0.3,
            gamma: 0.5,
            supervised: false,
            alpha: 0.1,
            learning_rate: 1e-3,
            decay_rate: 0.96,
            decay_steps: 10_000,
            dropout_keep: 0.8,
            batch_size: 100,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            encoder_hidden: vec![500, 500],
            decoder_hidden: vec![],
            classifier_hidden: vec![500, 500],
            chunk_size: 25,
            eval_k: 100,
        }
    }
}

pub const CONFIG_KEYS: [&str; 20] = [
    "bits",
    "binarization",
    "noise",
    "sigma",
    "gamma",
    "supervised",
    "alpha",
    "learning_rate",
    "decay_rate",
    "decay_steps",
    "dropout_keep",
    "batch_size",
    "max_epochs",
    "patience",
    "seed",
    "encoder_hidden",
    "decoder_hidden",
    "classifier_hidden",
    "chunk_size",
    "eval_k",
];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| NashError::Config(format!("invalid value `{value}` for `{key}`")))
}

fn parse_widths(key: &str, value: &str) -> Result<Vec<usize>> {
    if value.is_empty() || value == "none" {
        return Ok(Vec::new());
    }
    value.split(',').map(|w| parse_num(key, w.trim())).collect()
}

fn format_widths(w: &[usize]) -> String {
    if w.is_empty() {
        "none".into()
    } else {
        w.iter()
            .map(|x| x.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Splits `key=value` text into pairs. `#` starts a comment line.
pub fn parse_pairs(text: &str, source: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| NashError::parse(source, i + 1, "expected key=value"))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl TrainConfig {
    /// Sets one field from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "bits" => self.bits = parse_num(key, value)?,
            "binarization" => self.binarization = value.parse()?,
            "noise" => self.noise = value.parse()?,
            "sigma" => self.sigma = parse_num(key, value)?,
            "gamma" => self.gamma = parse_num(key, value)?,
            "supervised" => self.supervised = parse_num(key, value)?,
            "alpha" => self.alpha = parse_num(key, value)?,
            "learning_rate" => self.learning_rate = parse_num(key, value)?,
            "decay_rate" => self.decay_rate = parse_num(key, value)?,
            "decay_steps" => self.decay_steps = parse_num(key, value)?,
            "dropout_keep" => self.dropout_keep = parse_num(key, value)?,
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "max_epochs" => self.max_epochs = parse_num(key, value)?,
            "patience" => self.patience = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "encoder_hidden" => self.encoder_hidden = parse_widths(key, value)?,
            "decoder_hidden" => self.decoder_hidden = parse_widths(key, value)?,
            "classifier_hidden" => self.classifier_hidden = parse_widths(key, value)?,
            "chunk_size" => self.chunk_size = parse_num(key, value)?,
            "eval_k" => self.eval_k = parse_num(key, value)?,
            _ => return Err(NashError::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "bits" => self.bits.to_string(),
            "binarization" => self.binarization.to_string(),
            "noise" => self.noise.to_string(),
            "sigma" => self.sigma.to_string(),
            "gamma" => self.gamma.to_string(),
            "supervised" => self.supervised.to_string(),
            "alpha" => self.alpha.to_string(),
            "learning_rate" => self.learning_rate.to_string(),
            "decay_rate" => self.decay_rate.to_string(),
            "decay_steps" => self.decay_steps.to_string(),
            "dropout_keep" => self.dropout_keep.to_string(),
            "batch_size" => self.batch_size.to_string(),
            "max_epochs" => self.max_epochs.to_string(),
            "patience" => self.patience.to_string(),
            "seed" => self.seed.to_string(),
            "encoder_hidden" => format_widths(&self.encoder_hidden),
            "decoder_hidden" => format_widths(&self.decoder_hidden),
            "classifier_hidden" => format_widths(&self.classifier_hidden),
            "chunk_size" => self.chunk_size.to_string(),
            "eval_k" => self.eval_k.to_string(),
            _ => return None,
        })
    }

    /// Parses a full config file; unspecified keys keep their defaults.
    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        let mut seen = BTreeMap::new();
        for (k, v) in parse_pairs(text, source)? {
            if seen.insert(k.clone(), ()).is_some() {
                return Err(NashError::Config(format!("duplicate config key `{k}`")));
            }
            cfg.set(&k, &v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// All keys in a fixed order; `parse(format())` round-trips exactly.
    pub fn format(&self) -> String {
        let mut out = String::new();
        for k in CONFIG_KEYS {
            out.push_str(k);
            out.push('=');
            out.push_str(&self.get(k).expect("known key"));
            out.push('\n');
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(NashError::Config(msg));
        if !CODE_LENGTHS.contains(&self.bits) {
            return bad(format!(
                "bits must be one of {CODE_LENGTHS:?}, got {}",
                self.bits
            ));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma must be >= 0, got {}", self.sigma));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            ));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return bad(format!(
                "decay_rate must lie in (0, 1], got {}",
                self.decay_rate
            ));
        }
        if !(self.dropout_keep > 0.0 && self.dropout_keep <= 1.0) {
            return bad(format!(
                "dropout_keep must lie in (0, 1], got {}",
                self.dropout_keep
            ));
        }
        for (name, v) in [
            ("decay_steps", self.decay_steps as usize),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("patience", self.patience),
            ("chunk_size", self.chunk_size),
            ("eval_k", self.eval_k),
        ] {
            if v == 0 {
                return bad(format!("{name} must be >= 1"));
            }
        }
        if self
            .encoder_hidden
            .iter()
            .chain(&self.decoder_hidden)
            .chain(&self.classifier_hidden)
            .any(|&w| w == 0)
        {
            return bad("hidden widths must be >= 1".into());
        }
        Ok(())
    }

    /// `lr0 * decay_rate^floor(iter / decay_steps)`.
    pub fn learning_rate_at(&self, iter: u64) -> f64 {
        self.learning_rate * self.decay_rate.powi((iter / self.decay_steps) as i32)
    }

    pub fn noise_mode(&self) -> NoiseMode {
        match self.noise {
            NoiseKind::None => NoiseMode::None,
            NoiseKind::Fixed => NoiseMode::Fixed { sigma: self.sigma },
            NoiseKind::DataDependent => NoiseMode::DataDependent,
        }
    }

    pub fn objective(&self) -> Objective {
        Objective {
            binarization: self.binarization,
            noise: self.noise_mode(),
            prior: self.gamma,
            alpha: if self.supervised { self.alpha } else { 0.0 },
            dropout_rate: 1.0 - self.dropout_keep,
            recon_weight: 1.0,
            kl_weight: 1.0,
        }
    }

    pub fn architecture(&self, vocab_size: usize, num_classes: usize) -> Architecture {
        Architecture {
            vocab_size,
            bits: self.bits,
            encoder_hidden: self.encoder_hidden.clone(),
            decoder_hidden: self.decoder_hidden.clone(),
            classifier_hidden: self.classifier_hidden.clone(),
            num_classes: self.supervised.then_some(num_classes),
            noise_head: self.noise == NoiseKind::DataDependent,
        }
    }

    /// Bias of the noise head at initialization: `ln(sigma^2)`.
    pub fn initial_log_var(&self) -> f64 {
        (self.sigma.max(1e-4)).powi(2).ln()
    }
}
