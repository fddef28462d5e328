//! Packed code indices, exact Hamming top-k search and precision@K.

use std::fmt::Write as _;

use crate::corpus::DocumentVector;
use crate::error::{NashError, Result};
use crate::model::{binarize_deterministic, encode_probs_batch, HashCode, NashParams};
use crate::nn::Rng;
use crate::par::Parallelism;

/// Documents encoded per batched forward pass when building an index.
const ENCODE_CHUNK: usize = 256;

/// Immutable table of packed codes, rows sorted by ascending doc id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeIndex {
    bits: usize,
    stride: usize,
    words: Vec<u64>,
    doc_ids: Vec<u32>,
    labels: Vec<Option<u32>>,
}

impl CodeIndex {
    /// Builds an index from `(doc_id, label, code)` rows. Rows are sorted by
    /// doc id; duplicate ids and mixed code lengths are rejected.
    pub fn from_codes(bits: usize, mut rows: Vec<(u32, Option<u32>, HashCode)>) -> Result<Self> {
        HashCode::zeros(bits)?;
        rows.sort_by_key(|r| r.0);
        if rows.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(NashError::Contract("duplicate doc id in code index".into()));
        }
        let stride = bits.div_ceil(64);
        let mut words = Vec::with_capacity(rows.len() * stride);
        let mut doc_ids = Vec::with_capacity(rows.len());
        let mut labels = Vec::with_capacity(rows.len());
        for (id, label, code) in rows {
            if code.len() != bits {
                return Err(NashError::shape("code index row", bits, code.len()));
            }
            words.extend_from_slice(code.words());
            doc_ids.push(id);
            labels.push(label);
        }
        Ok(CodeIndex {
            bits,
            stride,
            words,
            doc_ids,
            labels,
        })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn doc_ids(&self) -> &[u32] {
        &self.doc_ids
    }

    pub fn labels(&self) -> &[Option<u32>] {
        &self.labels
    }

    /// Raw packed rows, `ceil(bits / 64)` words per document.
    pub fn packed(&self) -> &[u64] {
        &self.words
    }

    pub fn code(&self, row: usize) -> HashCode {
        HashCode::from_words(
            self.bits,
            &self.words[row * self.stride..(row + 1) * self.stride],
        )
        .expect("index rows are valid codes")
    }

    pub fn codes(&self) -> Vec<HashCode> {
        (0..self.len()).map(|r| self.code(r)).collect()
    }

    /// Row of a doc id, if present.
    pub fn position(&self, doc_id: u32) -> Option<usize> {
        self.doc_ids.binary_search(&doc_id).ok()
    }

    fn distances(&self, query: &HashCode) -> Vec<u32> {
        let q = query.words();
        match self.stride {
            1 => self.words.iter().map(|w| (w ^ q[0]).count_ones()).collect(),
            _ => self
                .words
                .chunks_exact(self.stride)
                .map(|row| row.iter().zip(q).map(|(a, b)| (a ^ b).count_ones()).sum())
                .collect(),
        }
    }
}

/// Deterministic codes for `docs` (no dropout, threshold 0.5).
pub fn encode_codes(
    params: &NashParams,
    docs: &[&DocumentVector],
    par: &Parallelism,
) -> Result<Vec<HashCode>> {
    let chunks = par.map_chunks(docs, ENCODE_CHUNK, |chunk| -> Result<Vec<HashCode>> {
        let probs = encode_probs_batch(params, chunk)?;
        probs
            .rows()
            .into_iter()
            .map(|r| binarize_deterministic(r.as_slice().expect("contiguous row")))
            .collect()
    });
    let mut out = Vec::with_capacity(docs.len());
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

pub fn build_index(
    params: &NashParams,
    docs: &[&DocumentVector],
    par: &Parallelism,
) -> Result<CodeIndex> {
    if docs.is_empty() {
        return Err(NashError::Contract(
            "cannot index an empty document set".into(),
        ));
    }
    for d in docs {
        d.validate(params.vocab_size()).map_err(|e| {
            NashError::Contract(format!("document {} does not fit the model: {e}", d.doc_id))
        })?;
    }
    let codes = encode_codes(params, docs, par)?;
    let rows = docs
        .iter()
        .zip(codes)
        .map(|(d, c)| (d.doc_id, d.label, c))
        .collect();
    CodeIndex::from_codes(params.bits(), rows)
}

/// Ranked neighbors of one query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetrievalResult {
    pub query_id: Option<u32>,
    pub k: usize,
    /// `(doc_id, distance)`, nondecreasing distance, ties by ascending id.
    pub neighbors: Vec<(u32, u32)>,
    /// Set when the database held fewer than `k` documents.
    pub truncated: bool,
}

/// Exact `k` nearest database codes by Hamming distance.
pub fn hamming_topk(index: &CodeIndex, query: &HashCode, k: usize) -> Result<RetrievalResult> {
    if query.len() != index.bits {
        return Err(NashError::shape(
            "hamming_topk query",
            index.bits,
            query.len(),
        ));
    }
    if k == 0 {
        return Err(NashError::Contract("k must be >= 1".into()));
    }
    let dist = index.distances(query);
    let take = k.min(dist.len());
    // Distances are bounded by the code length, so a counting pass finds the
    // cutoff distance and a second pass collects rows in id order.
    let mut hist = vec![0usize; index.bits + 1];
    for &d in &dist {
        hist[d as usize] += 1;
    }
    let mut cutoff = 0usize;
    let mut below = 0usize;
    while below + hist[cutoff] < take {
        below += hist[cutoff];
        cutoff += 1;
    }
    let mut at_cutoff = take - below;
    let mut buckets: Vec<Vec<(u32, u32)>> = vec![Vec::new(); cutoff + 1];
    for (row, &d) in dist.iter().enumerate() {
        let d = d as usize;
        if d < cutoff {
            buckets[d].push((index.doc_ids[row], d as u32));
        } else if d == cutoff && at_cutoff > 0 {
            buckets[d].push((index.doc_ids[row], d as u32));
            at_cutoff -= 1;
        }
    }
    let neighbors: Vec<(u32, u32)> = buckets.into_iter().flatten().collect();
    debug_assert_eq!(neighbors.len(), take);
    Ok(RetrievalResult {
        query_id: None,
        k,
        neighbors,
        truncated: take < k,
    })
}

/// Reference implementation comparing codes bit by bit and fully sorting.
pub fn hamming_topk_naive(
    database: &[(u32, HashCode)],
    query: &HashCode,
    k: usize,
) -> Vec<(u32, u32)> {
    let mut all: Vec<(u32, u32)> = database
        .iter()
        .map(|(id, code)| {
            let d = (0..query.len())
                .filter(|&i| code.get(i) != query.get(i))
                .count() as u32;
            (*id, d)
        })
        .collect();
    all.sort_by_key(|&(id, d)| (d, id));
    all.truncate(k);
    all
}

/// Runs every query of `queries` against `database`, results in query order.
pub fn search_all(
    queries: &CodeIndex,
    database: &CodeIndex,
    k: usize,
    par: &Parallelism,
) -> Result<Vec<RetrievalResult>> {
    let rows: Vec<usize> = (0..queries.len()).collect();
    par.try_map(&rows, |_, &r| {
        let mut res = hamming_topk(database, &queries.code(r), k)?;
        res.query_id = Some(queries.doc_ids[r]);
        Ok(res)
    })
}

/// Mean over queries of the fraction of retrieved documents sharing the
/// query's label.
pub fn precision_from_indices(
    queries: &CodeIndex,
    database: &CodeIndex,
    k: usize,
    par: &Parallelism,
) -> Result<f64> {
    if queries.is_empty() {
        return Err(NashError::Validation("no queries".into()));
    }
    if database.is_empty() {
        return Err(NashError::Validation("empty database".into()));
    }
    if queries
        .labels
        .iter()
        .chain(&database.labels)
        .any(Option::is_none)
    {
        return Err(NashError::Validation(
            "precision needs labeled queries and database".into(),
        ));
    }
    let rows: Vec<usize> = (0..queries.len()).collect();
    let per_query = par.try_map(&rows, |_, &r| {
        let res = hamming_topk(database, &queries.code(r), k)?;
        let label = queries.labels[r];
        let hits = res
            .neighbors
            .iter()
            .filter(|(id, _)| {
                database.labels[database.position(*id).expect("id from index")] == label
            })
            .count();
        Ok(hits as f64 / res.neighbors.len() as f64)
    })?;
    Ok(per_query.iter().sum::<f64>() / per_query.len() as f64)
}

/// Encodes queries and database with `params` and computes precision@k.
pub fn precision_at_k(
    params: &NashParams,
    queries: &[&DocumentVector],
    database: &[&DocumentVector],
    k: usize,
    par: &Parallelism,
) -> Result<f64> {
    if queries.iter().chain(database).any(|d| d.label.is_none()) {
        return Err(NashError::Validation(
            "precision needs labeled queries and database".into(),
        ));
    }
    let q = build_index(params, queries, par)?;
    let db = build_index(params, database, par)?;
    precision_from_indices(&q, &db, k, par)
}

/// Random-hyperplane codes: bit `j` is set when the projection of the
/// feature row onto a Gaussian direction is positive. Each term's
/// projection row is drawn from its own stream, so codes do not depend on
/// which other documents are encoded.
pub fn lsh_baseline(docs: &[&DocumentVector], bits: usize, seed: u64) -> Result<CodeIndex> {
    HashCode::zeros(bits)?;
    let root = Rng::new(seed);
    let mut cache: std::collections::HashMap<u32, Vec<f64>> = std::collections::HashMap::new();
    let mut rows = Vec::with_capacity(docs.len());
    for d in docs {
        let mut proj = vec![0.0; bits];
        for &(t, w) in &d.entries {
            let dir = cache.entry(t).or_insert_with(|| {
                let mut r = root.derive(&[t as u64]);
                let mut v = vec![0.0; bits];
                r.fill_normal(&mut v);
                v
            });
            for (p, &g) in proj.iter_mut().zip(dir.iter()) {
                *p += w * g;
            }
        }
        let bitsv: Vec<bool> = proj.iter().map(|&p| p > 0.0).collect();
        rows.push((d.doc_id, d.label, HashCode::from_bits(&bitsv)?));
    }
    CodeIndex::from_codes(bits, rows)
}

/// `query\trank\tdoc\tdistance` lines; ranks start at 1.
pub fn format_results(results: &[RetrievalResult]) -> String {
    let mut out = String::new();
    for r in results {
        let q = r
            .query_id
            .map(|q| q.to_string())
            .unwrap_or_else(|| "-".into());
        for (rank, (doc, dist)) in r.neighbors.iter().enumerate() {
            let _ = writeln!(out, "{q}\t{}\t{doc}\t{dist}", rank + 1);
        }
    }
    out
}

pub fn format_precision(k: usize, precision: f64) -> String {
    format!("precision_at_{k}={precision:.4}")
}
