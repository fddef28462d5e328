//! Qualitative tooling: word neighborhoods in the embedding space, code
//! listings and rate/distortion tables from metrics logs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::corpus::{DocumentVector, Vocabulary};
use crate::error::{NashError, Result};
use crate::model::NashParams;
use crate::par::Parallelism;
use crate::retrieval::{encode_codes, CodeIndex};
use crate::train::metrics::parse_fields;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WordMetric {
    #[default]
    Cosine,
    Euclidean,
}

impl FromStr for WordMetric {
    type Err = NashError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cosine" => Ok(WordMetric::Cosine),
            "euclidean" => Ok(WordMetric::Euclidean),
            _ => Err(NashError::Config(format!(
                "unknown metric `{s}` (expected cosine or euclidean)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordNeighborhood {
    pub probe: String,
    /// Nondecreasing distance; ties by vocabulary id.
    pub neighbors: Vec<(String, f64)>,
}

/// Closest vocabulary entries by string similarity, for error messages.
pub fn suggest_terms(vocab: &Vocabulary, probe: &str, n: usize) -> Vec<String> {
    let mut scored: Vec<(f64, &String)> = vocab
        .terms()
        .iter()
        .map(|t| (strsim::jaro_winkler(probe, t), t))
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    scored.into_iter().take(n).map(|(_, t)| t.clone()).collect()
}

/// The `n` terms whose embedding columns are closest to the probe's.
pub fn nearest_words(
    params: &NashParams,
    vocab: &Vocabulary,
    probe: &str,
    n: usize,
    metric: WordMetric,
) -> Result<WordNeighborhood> {
    if vocab.len() != params.vocab_size() {
        return Err(NashError::Mismatch(format!(
            "vocabulary has {} terms but the model expects {}",
            vocab.len(),
            params.vocab_size()
        )));
    }
    let id = vocab.id(probe).ok_or_else(|| NashError::Lookup {
        probe: probe.to_string(),
        suggestions: suggest_terms(vocab, probe, 5),
    })? as usize;
    let e = &params.embedding;
    let column = |j: usize| e.column(j);
    let norms: Vec<f64> = (0..e.ncols())
        .map(|j| column(j).dot(&column(j)).sqrt())
        .collect();
    let p = column(id);
    let mut scored: Vec<(f64, usize)> = (0..e.ncols())
        .filter(|&j| j != id)
        .map(|j| {
            let d = match metric {
                WordMetric::Cosine => {
                    let denom = norms[id] * norms[j];
                    if denom > 0.0 {
                        1.0 - p.dot(&column(j)) / denom
                    } else {
                        1.0
                    }
                }
                WordMetric::Euclidean => (&p - &column(j)).mapv(|v| v * v).sum().sqrt(),
            };
            (d, j)
        })
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(WordNeighborhood {
        probe: probe.to_string(),
        neighbors: scored
            .into_iter()
            .take(n)
            .map(|(d, j)| (vocab.term(j as u32).expect("id in range").to_string(), d))
            .collect(),
    })
}

/// `probe\trank\tword\tdistance` lines.
pub fn format_neighborhood(n: &WordNeighborhood) -> String {
    let mut out = String::new();
    for (rank, (w, d)) in n.neighbors.iter().enumerate() {
        let _ = writeln!(out, "{}\t{}\t{w}\t{d:.6}", n.probe, rank + 1);
    }
    out
}

/// `doc_id\tlabel\tbitstring` per document with deterministic codes. Labels
/// print as names when available, `-` when missing.
pub fn dump_codes(
    params: &NashParams,
    docs: &[&DocumentVector],
    label_names: &[String],
    par: &Parallelism,
) -> Result<String> {
    let codes = encode_codes(params, docs, par)?;
    let mut out = String::new();
    for (d, c) in docs.iter().zip(codes) {
        let label = match d.label {
            Some(l) => label_names
                .get(l as usize)
                .cloned()
                .unwrap_or_else(|| l.to_string()),
            None => "-".into(),
        };
        let _ = writeln!(out, "{}\t{label}\t{c}", d.doc_id);
    }
    Ok(out)
}

/// `doc_id\tbitstring` per document.
pub fn encode_listing(
    params: &NashParams,
    docs: &[&DocumentVector],
    par: &Parallelism,
) -> Result<String> {
    let codes = encode_codes(params, docs, par)?;
    let mut out = String::new();
    for (d, c) in docs.iter().zip(codes) {
        let _ = writeln!(out, "{}\t{c}", d.doc_id);
    }
    Ok(out)
}

/// Mean Hamming distance between codes of same-label and of different-label
/// documents (each unordered pair once).
pub fn class_distance_stats(index: &CodeIndex) -> Result<(f64, f64)> {
    let labels = index.labels();
    if labels.iter().any(Option::is_none) {
        return Err(NashError::Analysis(
            "distance statistics need labels".into(),
        ));
    }
    let codes = index.codes();
    let (mut intra, mut n_intra, mut inter, mut n_inter) = (0u64, 0u64, 0u64, 0u64);
    for i in 0..codes.len() {
        for j in i + 1..codes.len() {
            let d = codes[i].hamming(&codes[j]) as u64;
            if labels[i] == labels[j] {
                intra += d;
                n_intra += 1;
            } else {
                inter += d;
                n_inter += 1;
            }
        }
    }
    if n_intra == 0 || n_inter == 0 {
        return Err(NashError::Analysis(
            "need pairs within and across labels".into(),
        ));
    }
    Ok((intra as f64 / n_intra as f64, inter as f64 / n_inter as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RdPoint {
    pub iter: u64,
    pub rate_bits: f64,
    pub distortion: f64,
}

/// Which logged rate a curve uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateField {
    /// Rate at sampled codes (`rate`).
    #[default]
    Sampled,
    /// Rate at the most likely code (`rate_map`).
    Map,
}

impl FromStr for RateField {
    type Err = NashError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sampled" | "rate" => Ok(RateField::Sampled),
            "map" | "rate_map" => Ok(RateField::Map),
            _ => Err(NashError::Config(format!(
                "unknown rate field `{s}` (expected sampled or map)"
            ))),
        }
    }
}

/// One point per epoch: the last iteration of the epoch and the mean rate
/// and distortion of its records.
pub fn rate_distortion_curve(log: &str, field: RateField) -> Result<Vec<RdPoint>> {
    let rate_key = match field {
        RateField::Sampled => "rate",
        RateField::Map => "rate_map",
    };
    let mut epochs: BTreeMap<u64, (u64, f64, f64, usize)> = BTreeMap::new();
    for (i, line) in log.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields = parse_fields(line)
            .map_err(|e| NashError::Analysis(format!("metrics line {}: {e}", i + 1)))?;
        let get = |k: &str| -> Result<f64> {
            let v = fields
                .iter()
                .find(|(key, _)| key == k)
                .map(|(_, v)| v)
                .ok_or_else(|| {
                    NashError::Analysis(format!("metrics line {} lacks `{k}`", i + 1))
                })?;
            v.parse().map_err(|_| {
                NashError::Analysis(format!("metrics line {}: bad `{k}` value `{v}`", i + 1))
            })
        };
        let epoch = get("epoch")? as u64;
        let iter = get("iter")? as u64;
        let (rate, distortion) = (get(rate_key)?, get("distortion")?);
        let e = epochs.entry(epoch).or_insert((0, 0.0, 0.0, 0));
        e.0 = e.0.max(iter);
        e.1 += rate;
        e.2 += distortion;
        e.3 += 1;
    }
    Ok(epochs
        .into_values()
        .map(|(iter, r, d, n)| RdPoint {
            iter,
            rate_bits: r / n as f64,
            distortion: d / n as f64,
        })
        .collect())
}

pub fn format_rd_csv(points: &[RdPoint]) -> String {
    let mut out = String::from("iter,rate_bits,distortion\n");
    for p in points {
        let _ = writeln!(out, "{},{},{}", p.iter, p.rate_bits, p.distortion);
    }
    out
}
