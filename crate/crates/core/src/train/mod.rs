//! Mini-batch training with Adam, step decay, validation-based model
//! selection, metrics records and resumable checkpoints.

pub mod config;
pub mod metrics;
pub mod store;

use std::time::Instant;

use crate::corpus::{Corpus, CorpusSplit, DocumentVector};
use crate::error::{NashError, Result};
use crate::model::{
    binarize_deterministic, binarize_stochastic, encode_probs_batch, loss_and_grads, map_rate,
    rate_distortion_report, Draws, LossReport, NashParams, Objective,
};
use crate::nn::{AdamConfig, AdamState, Checkpoint, ParamSet, Rng, TensorList};
use crate::par::Parallelism;
use crate::retrieval::{build_index, precision_from_indices};

pub use config::{NoiseKind, TrainConfig, CODE_LENGTHS};
pub use metrics::{EpochRecord, TrainReport};
pub use store::{load_model, model_checkpoint};

const STREAM_INIT: u64 = 0;
const STREAM_SHUFFLE: u64 = 1;
const STREAM_DOC: u64 = 2;
const STREAM_DIAG: u64 = 3;

/// Precision@k of validation queries against the training documents.
pub fn validate(
    params: &NashParams,
    corpus: &Corpus,
    split: &CorpusSplit,
    k: usize,
    par: &Parallelism,
) -> Result<f64> {
    if !corpus.is_labeled() {
        return Err(NashError::Validation(
            "validation needs a labeled corpus".into(),
        ));
    }
    if split.valid.is_empty() || split.train.is_empty() {
        return Err(NashError::Validation(
            "empty validation or training split".into(),
        ));
    }
    let queries = build_index(params, &corpus.select(&split.valid)?, par)?;
    let database = build_index(params, &corpus.select(&split.train)?, par)?;
    precision_from_indices(&queries, &database, k, par)
}

/// Add-one smoothed log unigram probabilities of the training words; the
/// decoder's word bias starts here so the code only has to explain what
/// differs between documents.
pub fn unigram_log_probs(docs: &[&DocumentVector], vocab_size: usize) -> Vec<f64> {
    let mut counts = vec![1.0; vocab_size];
    for d in docs {
        for &(w, c) in &d.raw_counts {
            counts[w as usize] += c;
        }
    }
    let total: f64 = counts.iter().sum();
    counts.iter().map(|c| (c / total).ln()).collect()
}

/// Rate and distortion means over a document set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub rate: f64,
    pub rate_map: f64,
    pub rate_map_max: f64,
    pub distortion: f64,
}

/// Rate at a code sampled from each document's own stream, rate and
/// distortion at the most likely code.
pub fn diagnostics(
    params: &NashParams,
    docs: &[&DocumentVector],
    rng: &Rng,
    par: &Parallelism,
) -> Result<Diagnostics> {
    let per_chunk = par.map_chunks(docs, 256, |chunk| -> Result<Vec<(f64, f64, f64)>> {
        let probs = encode_probs_batch(params, chunk)?;
        chunk
            .iter()
            .zip(probs.rows())
            .map(|(d, row)| {
                let h = row.as_slice().expect("contiguous row");
                let map_code = binarize_deterministic(h)?;
                let (sampled, _) = binarize_stochastic(h, &mut rng.derive(&[d.doc_id as u64]))?;
                let sampled_rate = rate_distortion_report(h, &sampled, params, d)?.rate;
                let rd = rate_distortion_report(h, &map_code, params, d)?;
                Ok((sampled_rate, map_rate(h), rd.distortion))
            })
            .collect()
    });
    let (mut rate, mut rate_map, mut rate_map_max, mut distortion) = (0.0, 0.0, 0.0f64, 0.0);
    let mut n = 0usize;
    for chunk in per_chunk {
        for (r, m, d) in chunk? {
            rate += r;
            rate_map += m;
            rate_map_max = rate_map_max.max(m);
            distortion += d;
            n += 1;
        }
    }
    let n = n.max(1) as f64;
    Ok(Diagnostics {
        rate: rate / n,
        rate_map: rate_map / n,
        rate_map_max,
        distortion: distortion / n,
    })
}

/// Training loop state. Every random draw is derived from the run seed and
/// the position (epoch, document), so state only needs saving at epoch
/// boundaries to resume exactly.
pub struct Trainer<'a> {
    corpus: &'a Corpus,
    split: &'a CorpusSplit,
    config: TrainConfig,
    objective: Objective,
    par: Parallelism,
    root: Rng,
    params: NashParams,
    adam: AdamState,
    epoch: usize,
    iter: u64,
    best: NashParams,
    best_precision: Option<f64>,
    since_best: usize,
    report: TrainReport,
    can_validate: bool,
}

impl<'a> Trainer<'a> {
    pub fn new(
        corpus: &'a Corpus,
        split: &'a CorpusSplit,
        config: &TrainConfig,
        par: Parallelism,
    ) -> Result<Self> {
        config.validate()?;
        if split.train.is_empty() {
            return Err(NashError::Split("training split is empty".into()));
        }
        corpus.select(&split.train)?;
        corpus.select(&split.valid)?;
        if config.supervised && !corpus.is_labeled() {
            return Err(NashError::Config(
                "supervised training needs a labeled corpus".into(),
            ));
        }
        let arch = config.architecture(corpus.vocab_size(), corpus.num_classes());
        let root = Rng::new(config.seed);
        let mut params = NashParams::init(
            &arch,
            &mut root.derive(&[STREAM_INIT]),
            config.initial_log_var(),
        )?;
        params.word_bias =
            unigram_log_probs(&corpus.select(&split.train)?, corpus.vocab_size()).into();
        let objective = config.objective();
        objective.validate(&params)?;
        let can_validate = corpus.is_labeled() && !split.valid.is_empty();
        if !can_validate {
            log::warn!("no labeled validation set; the final epoch's model will be kept");
        }
        Ok(Trainer {
            corpus,
            split,
            objective,
            par,
            adam: AdamState::new(
                AdamConfig {
                    learning_rate: config.learning_rate,
                    ..AdamConfig::default()
                },
                &params,
            ),
            best: params.clone(),
            params,
            root,
            config: config.clone(),
            epoch: 0,
            iter: 0,
            best_precision: None,
            since_best: 0,
            report: TrainReport::default(),
            can_validate,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn params(&self) -> &NashParams {
        &self.params
    }

    /// Best parameters so far (the last good ones when training diverges).
    pub fn best(&self) -> &NashParams {
        &self.best
    }

    pub fn report(&self) -> &TrainReport {
        &self.report
    }

    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn iteration(&self) -> u64 {
        self.iter
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.config.max_epochs || self.report.stopped_early
    }

    fn diverged(&self, reason: String) -> NashError {
        NashError::Diverged {
            epoch: self.epoch + 1,
            iter: self.iter,
            reason,
        }
    }

    fn step(&mut self, batch: &[u32]) -> Result<LossReport> {
        let docs = self.corpus.select(batch)?;
        let epoch = self.epoch as u64;
        let (params, objective, root) = (&self.params, &self.objective, &self.root);
        let parts = self.par.map_chunks(&docs, self.config.chunk_size, |chunk| {
            let mut rngs: Vec<Rng> = chunk
                .iter()
                .map(|d| root.derive(&[STREAM_DOC, epoch, d.doc_id as u64]))
                .collect();
            let draws = Draws::sample(params, objective, &mut rngs, true);
            loss_and_grads(params, chunk, &draws, objective)
        });
        let mut report = LossReport::default();
        let mut grads: Option<NashParams> = None;
        for part in parts {
            let (r, g) = part.map_err(|e| match e {
                NashError::NonFinite(what) => self.diverged(format!("non-finite {what}")),
                other => other,
            })?;
            report.merge(&r);
            match grads.as_mut() {
                Some(acc) => acc.add_assign(&g),
                None => grads = Some(g),
            }
        }
        if !report.total.is_finite() {
            return Err(self.diverged("non-finite loss".into()));
        }
        let mut grads = grads.expect("nonempty batch");
        grads.scale(1.0 / docs.len() as f64);
        let lr = self.config.learning_rate_at(self.iter);
        self.adam
            .step(&mut self.params, &grads, lr)
            .map_err(|e| self.diverged(e.to_string()))?;
        if let Some(name) = self.params.first_non_finite() {
            return Err(self.diverged(format!("non-finite parameter {name}")));
        }
        self.iter += 1;
        Ok(report)
    }

    /// One pass over the training split followed by validation. Returns the
    /// new metrics record.
    pub fn run_epoch(&mut self) -> Result<EpochRecord> {
        let mut order = self.split.train.clone();
        self.root
            .derive(&[STREAM_SHUFFLE, self.epoch as u64])
            .shuffle(&mut order);
        let mut total = LossReport::default();
        let mut lr = self.config.learning_rate_at(self.iter);
        for batch in order.chunks(self.config.batch_size) {
            lr = self.config.learning_rate_at(self.iter);
            total.merge(&self.step(batch)?);
        }
        let n = total.docs.max(1) as f64;
        let train_docs = self.corpus.select(&self.split.train)?;
        let diag = diagnostics(
            &self.params,
            &train_docs,
            &self.root.derive(&[STREAM_DIAG, self.epoch as u64]),
            &self.par,
        )?;
        let val_precision = if self.can_validate {
            Some(validate(
                &self.params,
                self.corpus,
                self.split,
                self.config.eval_k,
                &self.par,
            )?)
        } else {
            None
        };
        self.epoch += 1;
        match val_precision {
            Some(p) if self.best_precision.is_none_or(|b| p > b) => {
                self.best = self.params.clone();
                self.best_precision = Some(p);
                self.report.best_epoch = Some(self.epoch);
                self.report.best_val_precision = Some(p);
                self.since_best = 0;
            }
            Some(_) => {
                self.since_best += 1;
                if self.since_best >= self.config.patience {
                    self.report.stopped_early = true;
                }
            }
            None => {
                self.best = self.params.clone();
                self.report.best_epoch = Some(self.epoch);
            }
        }
        let record = EpochRecord {
            epoch: self.epoch,
            iter: self.iter,
            loss_recon: total.recon / n,
            loss_kl: total.kl / n,
            loss_dis: total.dis / n,
            lr,
            val_precision,
            rate: diag.rate,
            rate_map: diag.rate_map,
            rate_map_max: diag.rate_map_max,
            distortion: diag.distortion,
        };
        self.report.records.push(record);
        Ok(record)
    }

    /// Runs epochs until `max_epochs` or early stopping, handing every
    /// record to `on_epoch` as it is produced.
    pub fn run(
        &mut self,
        mut on_epoch: impl FnMut(&Trainer<'_>, &EpochRecord) -> Result<()>,
    ) -> Result<()> {
        let started = Instant::now();
        while !self.is_finished() {
            let record = self.run_epoch();
            self.report.wall_clock += started.elapsed();
            let record = record?;
            log::info!("{}", record.format());
            on_epoch(self, &record)?;
        }
        Ok(())
    }

    pub fn finish(self) -> (NashParams, TrainReport) {
        (self.best, self.report)
    }

    /// Full state at the current epoch boundary.
    pub fn state_checkpoint(&self) -> Checkpoint {
        let mut meta = vec![
            ("kind".to_string(), store::KIND_STATE.to_string()),
            ("config".to_string(), self.config.format()),
        ];
        meta.extend(store::arch_meta(&self.params.arch));
        meta.push(("epoch".into(), self.epoch.to_string()));
        meta.push(("iter".into(), self.iter.to_string()));
        meta.push(("adam_step".into(), self.adam.step.to_string()));
        meta.push((
            "best_precision".into(),
            self.best_precision
                .map_or_else(|| "na".into(), |p| p.to_string()),
        ));
        meta.push((
            "best_epoch".into(),
            self.report
                .best_epoch
                .map_or_else(|| "na".into(), |e| e.to_string()),
        ));
        meta.push(("since_best".into(), self.since_best.to_string()));
        meta.push((
            "stopped_early".into(),
            self.report.stopped_early.to_string(),
        ));
        meta.push(("metrics".into(), self.report.metrics_log()));
        let mut arrays = TensorList::from_params(&self.params);
        for t in self.best.tensors() {
            arrays.push(format!("best.{}", t.name), t.shape, t.data.to_vec());
        }
        arrays
            .entries
            .extend(self.adam.to_tensors(&self.params).entries);
        Checkpoint { meta, arrays }
    }

    /// Continues a run from [`state_checkpoint`](Self::state_checkpoint).
    /// The corpus, split and configuration must match the original run.
    pub fn resume(
        corpus: &'a Corpus,
        split: &'a CorpusSplit,
        ckpt: &Checkpoint,
        par: Parallelism,
    ) -> Result<Self> {
        let meta = |k: &str| -> Result<&str> {
            ckpt.meta_value(k)
                .ok_or_else(|| NashError::Mismatch(format!("checkpoint lacks `{k}`")))
        };
        if meta("kind")? != store::KIND_STATE {
            return Err(NashError::Mismatch(
                "not a training-state checkpoint".into(),
            ));
        }
        let config = TrainConfig::parse(meta("config")?, "checkpoint config")?;
        let mut t = Trainer::new(corpus, split, &config, par)?;
        let arch = store::arch_from_meta(ckpt)?;
        if arch != t.params.arch {
            return Err(NashError::Mismatch(
                "checkpoint architecture does not match the corpus".into(),
            ));
        }
        let num = |k: &str| -> Result<u64> {
            meta(k)?
                .parse()
                .map_err(|_| NashError::Mismatch(format!("bad checkpoint field `{k}`")))
        };
        let opt = |k: &str| -> Result<Option<f64>> {
            match meta(k)? {
                "na" => Ok(None),
                v => v
                    .parse()
                    .map(Some)
                    .map_err(|_| NashError::Mismatch(format!("bad checkpoint field `{k}`"))),
            }
        };
        t.params = store::params_from_arrays(&arch, &ckpt.arrays, "")?;
        t.best = store::params_from_arrays(&arch, &ckpt.arrays, "best.")?;
        t.adam = AdamState::from_tensors(
            t.adam.config,
            num("adam_step")?,
            &t.params,
            &ckpt.arrays.entries,
        )?;
        t.epoch = num("epoch")? as usize;
        t.iter = num("iter")?;
        t.since_best = num("since_best")? as usize;
        t.best_precision = opt("best_precision")?;
        t.report.best_val_precision = t.best_precision;
        t.report.best_epoch = opt("best_epoch")?.map(|e| e as usize);
        t.report.stopped_early = meta("stopped_early")? == "true";
        t.report.records = meta("metrics")?
            .lines()
            .map(EpochRecord::parse)
            .collect::<Result<_>>()
            .map_err(|e| NashError::Mismatch(e.to_string()))?;
        Ok(t)
    }
}

/// Trains to completion and returns the selected parameters.
pub fn train(
    corpus: &Corpus,
    split: &CorpusSplit,
    config: &TrainConfig,
    par: &Parallelism,
) -> Result<(NashParams, TrainReport)> {
    let mut trainer = Trainer::new(corpus, split, config, par.clone())?;
    trainer.run(|_, _| Ok(()))?;
    Ok(trainer.finish())
}

#[cfg(test)]
mod tests;
