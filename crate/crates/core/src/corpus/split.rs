use std::collections::BTreeMap;

use super::tfidf::DocumentVector;
use crate::error::{NashError, Result};
use crate::nn::Rng;

/// Disjoint train/validation/test partition by document id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusSplit {
    pub train: Vec<u32>,
    pub valid: Vec<u32>,
    pub test: Vec<u32>,
    pub seed: u64,
}

impl CorpusSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, valid: f64, test: f64) -> Result<Self> {
        let r = SplitRatios { train, valid, test };
        let ok = [train, valid, test]
            .iter()
            .all(|&x| x > 0.0 && x.is_finite())
            && ((train + valid + test) - 1.0).abs() < 1e-9;
        if !ok {
            return Err(NashError::Split(format!(
                "ratios must be positive and sum to 1, got ({train}, {valid}, {test})"
            )));
        }
        Ok(r)
    }
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios {
            train: 0.8,
            valid: 0.1,
            test: 0.1,
        }
    }
}

/// Seeded shuffled partition, stratified by label when every document is
/// labeled. Each split is returned in ascending doc-id order.
pub fn split_corpus(
    docs: &[DocumentVector],
    ratios: SplitRatios,
    seed: u64,
) -> Result<CorpusSplit> {
    SplitRatios::new(ratios.train, ratios.valid, ratios.test)?;
    if docs.len() < 3 {
        return Err(NashError::Split(format!(
            "need at least 3 documents to split, got {}",
            docs.len()
        )));
    }

    let stratified = docs.iter().all(|d| d.label.is_some());
    let mut groups: BTreeMap<Option<u32>, Vec<u32>> = BTreeMap::new();
    for d in docs {
        let key = if stratified { d.label } else { None };
        groups.entry(key).or_default().push(d.doc_id);
    }

    let rng = Rng::new(seed);
    let mut split = CorpusSplit {
        train: Vec::new(),
        valid: Vec::new(),
        test: Vec::new(),
        seed,
    };
    for (key, mut ids) in groups {
        ids.sort_unstable();
        let mut stream = rng.derive(&[key.map_or(u64::MAX, u64::from)]);
        stream.shuffle(&mut ids);
        let n = ids.len();
        let n_train = ((n as f64 * ratios.train).round() as usize).min(n);
        let n_valid = ((n as f64 * ratios.valid).round() as usize).min(n - n_train);
        split.train.extend_from_slice(&ids[..n_train]);
        split
            .valid
            .extend_from_slice(&ids[n_train..n_train + n_valid]);
        split.test.extend_from_slice(&ids[n_train + n_valid..]);
    }
    split.train.sort_unstable();
    split.valid.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}
