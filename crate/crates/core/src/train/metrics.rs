use std::fmt::Write as _;
use std::time::Duration;

use crate::error::{NashError, Result};
use crate::train::config::parse_pairs;

/// One line of the metrics log, written after every epoch. Losses are means
/// per training document.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub iter: u64,
    pub loss_recon: f64,
    pub loss_kl: f64,
    pub loss_dis: f64,
    /// Learning rate used by the last update of the epoch.
    pub lr: f64,
    pub val_precision: Option<f64>,
    /// Mean rate (bits) at sampled codes.
    pub rate: f64,
    /// Mean rate at the most likely code.
    pub rate_map: f64,
    /// Largest per-document rate at the most likely code.
    pub rate_map_max: f64,
    pub distortion: f64,
}

pub const RECORD_KEYS: [&str; 11] = [
    "epoch",
    "iter",
    "loss_recon",
    "loss_kl",
    "loss_dis",
    "lr",
    "val_precision",
    "rate",
    "rate_map",
    "rate_map_max",
    "distortion",
];

impl EpochRecord {
    pub fn format(&self) -> String {
        let mut s = String::new();
        let val = self
            .val_precision
            .map_or_else(|| "na".to_string(), |v| v.to_string());
        let _ = write!(
            s,
            "epoch={} iter={} loss_recon={} loss_kl={} loss_dis={} lr={} val_precision={} rate={} rate_map={} rate_map_max={} distortion={}",
            self.epoch,
            self.iter,
            self.loss_recon,
            self.loss_kl,
            self.loss_dis,
            self.lr,
            val,
            self.rate,
            self.rate_map,
            self.rate_map_max,
            self.distortion
        );
        s
    }

    pub fn parse(line: &str) -> Result<Self> {
        let fields = parse_fields(line)?;
        let get = |k: &str| -> Result<&str> {
            fields
                .iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| NashError::Analysis(format!("metrics record lacks `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| NashError::Analysis(format!("bad value for `{k}`")))
        };
        let val = get("val_precision")?;
        Ok(EpochRecord {
            epoch: num("epoch")? as usize,
            iter: num("iter")? as u64,
            loss_recon: num("loss_recon")?,
            loss_kl: num("loss_kl")?,
            loss_dis: num("loss_dis")?,
            lr: num("lr")?,
            val_precision: if val == "na" {
                None
            } else {
                Some(
                    val.parse()
                        .map_err(|_| NashError::Analysis("bad val_precision".into()))?,
                )
            },
            rate: num("rate")?,
            rate_map: num("rate_map")?,
            rate_map_max: num("rate_map_max")?,
            distortion: num("distortion")?,
        })
    }
}

/// Space-separated `key=value` fields of one log line.
pub fn parse_fields(line: &str) -> Result<Vec<(String, String)>> {
    let joined = line.split_whitespace().collect::<Vec<_>>().join("\n");
    parse_pairs(&joined, "metrics")
}

/// Summary of a run. Wall-clock time is informational and excluded from
/// equality.
#[derive(Debug, Clone, Default)]
pub struct TrainReport {
    pub records: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub best_val_precision: Option<f64>,
    pub stopped_early: bool,
    pub wall_clock: Duration,
}

impl PartialEq for TrainReport {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
            && self.best_epoch == other.best_epoch
            && self.best_val_precision == other.best_val_precision
            && self.stopped_early == other.stopped_early
    }
}

impl TrainReport {
    pub fn metrics_log(&self) -> String {
        self.records.iter().map(|r| r.format() + "\n").collect()
    }
}
