//! Flat `key=value` run configuration: training keys plus corpus-building
//! keys, with command-line overrides applied on top.

use std::collections::BTreeSet;
use std::path::Path;

use nash_core::corpus::{CorpusOptions, SplitRatios};
use nash_core::train::config::parse_pairs;
use nash_core::train::TrainConfig;
use nash_core::{NashError, Result};

pub const BUILD_KEYS: [&str; 5] = [
    "max_vocab",
    "min_df",
    "train_ratio",
    "valid_ratio",
    "test_ratio",
];

#[derive(Debug, Clone, PartialEq)]
pub struct BuildSettings {
    pub options: CorpusOptions,
    pub ratios: [f64; 3],
}

impl Default for BuildSettings {
    fn default() -> Self {
        BuildSettings {
            options: CorpusOptions::default(),
            ratios: [0.8, 0.1, 0.1],
        }
    }
}

impl BuildSettings {
    pub fn split_ratios(&self) -> Result<SplitRatios> {
        SplitRatios::new(self.ratios[0], self.ratios[1], self.ratios[2])
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = || NashError::Config(format!("bad value `{value}` for `{key}`"));
        match key {
            "max_vocab" => self.options.max_vocab = value.parse().map_err(|_| bad())?,
            "min_df" => self.options.min_df = value.parse().map_err(|_| bad())?,
            "train_ratio" => self.ratios[0] = value.parse().map_err(|_| bad())?,
            "valid_ratio" => self.ratios[1] = value.parse().map_err(|_| bad())?,
            "test_ratio" => self.ratios[2] = value.parse().map_err(|_| bad())?,
            _ => return Err(NashError::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    pub fn format(&self) -> String {
        format!(
            "max_vocab={}\nmin_df={}\ntrain_ratio={}\nvalid_ratio={}\ntest_ratio={}\n",
            self.options.max_vocab,
            self.options.min_df,
            self.ratios[0],
            self.ratios[1],
            self.ratios[2]
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub train: TrainConfig,
    pub build: BuildSettings,
    /// Keys given explicitly in the config file or on the command line.
    pub explicit: BTreeSet<String>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut s = Settings::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)?;
            let mut seen = BTreeSet::new();
            for (k, v) in parse_pairs(&text, &path.display().to_string())? {
                if !seen.insert(k.clone()) {
                    return Err(NashError::Config(format!("duplicate config key `{k}`")));
                }
                s.set(&k, &v)?;
            }
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if BUILD_KEYS.contains(&key) {
            self.build.set(key, value)?;
        } else {
            self.train.set(key, value)?;
        }
        self.explicit.insert(key.to_string());
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply(&mut self, pair: &str) -> Result<()> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| NashError::Config(format!("override `{pair}` is not key=value")))?;
        self.set(k.trim(), v.trim())
    }

    pub fn is_explicit(&self, key: &str) -> bool {
        self.explicit.contains(key)
    }
}
