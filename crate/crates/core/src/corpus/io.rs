//! Text formats for corpora.
//!
//! * raw corpus: `<label>\t<text>` per line, `-` for unlabeled
//! * sparse triplets: `#dims <num_docs> <vocab_size>` header, then
//!   `<doc_id> <term_id> <weight>` lines
//! * labels sidecar: `<doc_id> <label_id>` lines
//! * vocabulary: one term per line (line number = id), followed by a tab and
//!   its document frequency
//! * split: `<doc_id>\t<train|valid|test>` lines

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::split::CorpusSplit;
use super::tfidf::DocumentVector;
use super::vocab::Vocabulary;
use crate::error::{NashError, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDocument {
    pub label: Option<String>,
    pub text: String,
}

pub fn parse_raw_corpus(text: &str, source: &str) -> Result<Vec<RawDocument>> {
    let mut docs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (label, body) = line
            .split_once('\t')
            .ok_or_else(|| NashError::parse(source, line_no, "expected `<label>\\t<text>`"))?;
        let label = label.trim();
        if label.is_empty() {
            return Err(NashError::parse(
                source,
                line_no,
                "empty label field (use `-` for unlabeled)",
            ));
        }
        docs.push(RawDocument {
            label: (label != "-").then(|| label.to_string()),
            text: body.to_string(),
        });
    }
    Ok(docs)
}

pub fn read_raw_corpus(path: &Path) -> Result<Vec<RawDocument>> {
    let bytes = fs::read(path)?;
    let source = path.display().to_string();
    let text = String::from_utf8(bytes).map_err(|e| {
        let line = 1 + e.as_bytes()[..e.utf8_error().valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count();
        NashError::parse(&source, line, "invalid UTF-8")
    })?;
    parse_raw_corpus(&text, &source)
}

pub fn format_vocab(vocab: &Vocabulary) -> String {
    let mut out = String::new();
    for (t, df) in vocab.terms().iter().zip(vocab.doc_freqs()) {
        let _ = writeln!(out, "{t}\t{df}");
    }
    out
}

pub fn parse_vocab(text: &str, source: &str) -> Result<Vocabulary> {
    let mut terms = Vec::new();
    let mut dfs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let (term, df) = match line.split_once('\t') {
            Some((t, df)) => {
                let df = df
                    .parse::<u32>()
                    .map_err(|_| NashError::parse(source, i + 1, "bad document frequency"))?;
                (t, df)
            }
            None => (line, 1),
        };
        if term.is_empty() {
            return Err(NashError::parse(source, i + 1, "empty term"));
        }
        terms.push(term.to_string());
        dfs.push(df);
    }
    Vocabulary::from_parts(terms, dfs)
}

/// Which side of a [`DocumentVector`] a triplet file carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TripletField {
    Weights,
    Counts,
}

pub fn format_triplets(docs: &[DocumentVector], vocab_size: usize, field: TripletField) -> String {
    let mut out = format!("#dims {} {}\n", docs.len(), vocab_size);
    for d in docs {
        let row = match field {
            TripletField::Weights => &d.entries,
            TripletField::Counts => &d.raw_counts,
        };
        for &(t, w) in row {
            let _ = writeln!(out, "{} {} {}", d.doc_id, t, w);
        }
    }
    out
}

/// Parsed triplet file: rows keyed by doc id (ascending), each sorted by term.
#[derive(Debug, Clone, PartialEq)]
pub struct Triplets {
    pub num_docs: usize,
    pub vocab_size: usize,
    pub rows: BTreeMap<u32, Vec<(u32, f64)>>,
}

pub fn parse_triplets(text: &str, source: &str) -> Result<Triplets> {
    let mut lines = text.lines().enumerate();
    let (num_docs, vocab_size) = loop {
        match lines.next() {
            None => return Err(NashError::parse(source, 1, "missing `#dims` header")),
            Some((_, l)) if l.trim().is_empty() => continue,
            Some((i, l)) => {
                let parts: Vec<&str> = l.split_whitespace().collect();
                if parts.len() != 3 || parts[0] != "#dims" {
                    return Err(NashError::parse(
                        source,
                        i + 1,
                        "expected `#dims <num_docs> <vocab_size>`",
                    ));
                }
                let n = parts[1]
                    .parse::<usize>()
                    .map_err(|_| NashError::parse(source, i + 1, "bad num_docs"))?;
                let v = parts[2]
                    .parse::<usize>()
                    .map_err(|_| NashError::parse(source, i + 1, "bad vocab_size"))?;
                break (n, v);
            }
        }
    };
    let mut rows: BTreeMap<u32, Vec<(u32, f64)>> = BTreeMap::new();
    for (i, line) in lines {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let parsed = (|| {
            let d = it.next()?.parse::<u32>().ok()?;
            let t = it.next()?.parse::<u32>().ok()?;
            let w = it.next()?.parse::<f64>().ok()?;
            it.next().is_none().then_some((d, t, w))
        })();
        let (d, t, w) = parsed.ok_or_else(|| {
            NashError::parse(source, i + 1, "expected `<doc_id> <term_id> <weight>`")
        })?;
        if t as usize >= vocab_size {
            return Err(NashError::parse(
                source,
                i + 1,
                format!("term id {t} >= vocab size {vocab_size}"),
            ));
        }
        if !w.is_finite() || w < 0.0 {
            return Err(NashError::parse(
                source,
                i + 1,
                format!("invalid weight {w}"),
            ));
        }
        rows.entry(d).or_default().push((t, w));
    }
    for row in rows.values_mut() {
        row.sort_by_key(|&(t, _)| t);
    }
    Ok(Triplets {
        num_docs,
        vocab_size,
        rows,
    })
}

pub fn format_labels(docs: &[DocumentVector]) -> String {
    let mut out = String::new();
    for d in docs {
        if let Some(l) = d.label {
            let _ = writeln!(out, "{} {}", d.doc_id, l);
        }
    }
    out
}

pub fn parse_labels(text: &str, source: &str) -> Result<BTreeMap<u32, u32>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let parsed = (|| {
            let d = it.next()?.parse::<u32>().ok()?;
            let l = it.next()?.parse::<u32>().ok()?;
            it.next().is_none().then_some((d, l))
        })();
        let (d, l) = parsed
            .ok_or_else(|| NashError::parse(source, i + 1, "expected `<doc_id> <label_id>`"))?;
        out.insert(d, l);
    }
    Ok(out)
}

pub fn format_split(split: &CorpusSplit) -> String {
    let mut rows: Vec<(u32, &str)> = Vec::with_capacity(split.len());
    rows.extend(split.train.iter().map(|&d| (d, "train")));
    rows.extend(split.valid.iter().map(|&d| (d, "valid")));
    rows.extend(split.test.iter().map(|&d| (d, "test")));
    rows.sort_unstable();
    let mut out = format!("#seed {}\n", split.seed);
    for (d, part) in rows {
        let _ = writeln!(out, "{d}\t{part}");
    }
    out
}

pub fn parse_split(text: &str, source: &str) -> Result<CorpusSplit> {
    let mut split = CorpusSplit {
        train: Vec::new(),
        valid: Vec::new(),
        test: Vec::new(),
        seed: 0,
    };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(seed) = line.strip_prefix("#seed ") {
            split.seed = seed
                .trim()
                .parse()
                .map_err(|_| NashError::parse(source, i + 1, "bad seed"))?;
            continue;
        }
        let (d, part) = line
            .split_once('\t')
            .ok_or_else(|| NashError::parse(source, i + 1, "expected `<doc_id>\\t<part>`"))?;
        let d: u32 = d
            .parse()
            .map_err(|_| NashError::parse(source, i + 1, "bad doc id"))?;
        match part.trim() {
            "train" => split.train.push(d),
            "valid" => split.valid.push(d),
            "test" => split.test.push(d),
            other => {
                return Err(NashError::parse(
                    source,
                    i + 1,
                    format!("unknown split `{other}`"),
                ))
            }
        }
    }
    Ok(split)
}

/// Assembles documents from a weights file plus optional counts and labels.
/// Without counts the weights double as occurrence counts.
pub fn assemble_documents(
    weights: &Triplets,
    counts: Option<&Triplets>,
    labels: Option<&BTreeMap<u32, u32>>,
) -> Result<Vec<DocumentVector>> {
    let mut docs = Vec::with_capacity(weights.rows.len());
    for (&doc_id, entries) in &weights.rows {
        let raw_counts = match counts {
            Some(c) => c.rows.get(&doc_id).cloned().ok_or_else(|| {
                NashError::Corpus(format!("document {doc_id} missing from counts file"))
            })?,
            None => entries.clone(),
        };
        let doc = DocumentVector {
            doc_id,
            entries: entries.clone(),
            label: labels.and_then(|l| l.get(&doc_id).copied()),
            raw_counts,
        };
        if doc.validate(weights.vocab_size).is_err() {
            log::warn!("document {doc_id} has no usable features; skipped");
            continue;
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    Ok(fs::read_to_string(path)?)
}
