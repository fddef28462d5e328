use std::collections::BTreeMap;

use super::vocab::Vocabulary;
use crate::error::{NashError, Result};

/// Sparse nonnegative feature row. `entries` and `raw_counts` are sorted by
/// term id; the decoder scores `raw_counts`, the encoder reads `entries`.
#[derive(Debug, Clone, PartialEq)]
pub struct DocumentVector {
    pub doc_id: u32,
    pub entries: Vec<(u32, f64)>,
    pub label: Option<u32>,
    pub raw_counts: Vec<(u32, f64)>,
}

impl DocumentVector {
    pub fn total_count(&self) -> f64 {
        self.raw_counts.iter().map(|&(_, c)| c).sum()
    }

    /// Checks the downstream contract: nonempty, nonnegative, ids in range.
    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        if !self.entries.iter().any(|&(_, w)| w > 0.0) {
            return Err(NashError::Corpus(format!(
                "document {} has no nonzero feature",
                self.doc_id
            )));
        }
        for &(t, w) in self.entries.iter().chain(&self.raw_counts) {
            if t as usize >= vocab_size {
                return Err(NashError::Corpus(format!(
                    "document {} references term {t} >= vocabulary size {vocab_size}",
                    self.doc_id
                )));
            }
            if !w.is_finite() || w < 0.0 {
                return Err(NashError::Corpus(format!(
                    "document {} has invalid weight {w} for term {t}",
                    self.doc_id
                )));
            }
        }
        Ok(())
    }
}

/// Lowercase, split on anything that is not alphanumeric, drop tokens
/// shorter than two characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .collect()
}

/// Smoothed inverse document frequency `ln((1 + n) / (1 + df)) + 1`.
pub fn smoothed_idf(num_docs: usize, df: u32) -> f64 {
    ((1.0 + num_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// TF-IDF rows (raw count × smoothed idf, then L2-normalized). Document ids
/// are positions in `docs`. Documents without any in-vocabulary token are
/// skipped with a warning.
pub fn compute_tfidf(docs: &[Vec<String>], vocab: &Vocabulary) -> Vec<DocumentVector> {
    let n = docs.len();
    let mut out = Vec::with_capacity(n);
    for (doc_id, tokens) in docs.iter().enumerate() {
        let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
        for t in tokens {
            if let Some(id) = vocab.id(t) {
                *counts.entry(id).or_insert(0) += 1;
            }
        }
        if counts.is_empty() {
            log::warn!("document {doc_id} has no in-vocabulary tokens; skipped");
            continue;
        }
        let raw_counts: Vec<(u32, f64)> = counts.iter().map(|(&t, &c)| (t, c as f64)).collect();
        let mut entries: Vec<(u32, f64)> = counts
            .iter()
            .map(|(&t, &c)| (t, c as f64 * smoothed_idf(n, vocab.doc_freq(t))))
            .collect();
        let norm = entries.iter().map(|&(_, w)| w * w).sum::<f64>().sqrt();
        for e in &mut entries {
            e.1 /= norm;
        }
        out.push(DocumentVector {
            doc_id: doc_id as u32,
            entries,
            label: None,
            raw_counts,
        });
    }
    out
}
