//! Vocabulary, TF-IDF features, splits and corpus artifacts on disk.

pub mod io;
pub mod split;
pub mod tfidf;
pub mod vocab;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

pub use io::RawDocument;
pub use split::{split_corpus, CorpusSplit, SplitRatios};
pub use tfidf::{compute_tfidf, tokenize, DocumentVector};
pub use vocab::{build_vocabulary, Vocabulary};

use crate::error::{NashError, Result};
use io::TripletField;

pub const VOCAB_FILE: &str = "vocab.txt";
pub const FEATURES_FILE: &str = "features.txt";
pub const COUNTS_FILE: &str = "counts.txt";
pub const LABELS_FILE: &str = "labels.txt";
pub const LABEL_NAMES_FILE: &str = "label_names.txt";
pub const SPLIT_FILE: &str = "split.txt";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusOptions {
    pub max_vocab: usize,
    pub min_df: u32,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            max_vocab: 10_000,
            min_df: 1,
        }
    }
}

/// Immutable, fully preprocessed corpus. Documents are kept in ascending
/// doc-id order.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub vocab: Vocabulary,
    pub docs: Vec<DocumentVector>,
    pub label_names: Vec<String>,
}

impl Corpus {
    pub fn from_raw(raw: &[RawDocument], options: &CorpusOptions) -> Result<Corpus> {
        let tokens: Vec<Vec<String>> = raw.iter().map(|d| tokenize(&d.text)).collect();
        Self::from_tokens(
            &tokens,
            raw.iter().map(|d| d.label.as_deref()).collect(),
            options,
        )
    }

    pub fn from_tokens(
        tokens: &[Vec<String>],
        labels: Vec<Option<&str>>,
        options: &CorpusOptions,
    ) -> Result<Corpus> {
        if tokens.len() != labels.len() {
            return Err(NashError::Corpus("token and label counts differ".into()));
        }
        let vocab = build_vocabulary(tokens, options.max_vocab, options.min_df)?;
        let label_names: Vec<String> = labels
            .iter()
            .flatten()
            .map(|s| s.to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut docs = compute_tfidf(tokens, &vocab);
        for d in &mut docs {
            d.label = labels[d.doc_id as usize]
                .map(|l| label_names.binary_search_by(|n| n.as_str().cmp(l)).unwrap() as u32);
        }
        if docs.is_empty() {
            return Err(NashError::Corpus(
                "all documents are empty after filtering".into(),
            ));
        }
        Ok(Corpus {
            vocab,
            docs,
            label_names,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn num_classes(&self) -> usize {
        let max_label = self.docs.iter().filter_map(|d| d.label).max();
        self.label_names
            .len()
            .max(max_label.map_or(0, |l| l as usize + 1))
    }

    pub fn is_labeled(&self) -> bool {
        self.docs.iter().all(|d| d.label.is_some())
    }

    pub fn doc(&self, doc_id: u32) -> Option<&DocumentVector> {
        self.docs
            .binary_search_by_key(&doc_id, |d| d.doc_id)
            .ok()
            .map(|i| &self.docs[i])
    }

    pub fn select(&self, ids: &[u32]) -> Result<Vec<&DocumentVector>> {
        ids.iter()
            .map(|&id| {
                self.doc(id)
                    .ok_or_else(|| NashError::Corpus(format!("unknown document id {id}")))
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        for w in self.docs.windows(2) {
            if w[0].doc_id >= w[1].doc_id {
                return Err(NashError::Corpus(
                    "documents not in ascending id order".into(),
                ));
            }
        }
        for d in &self.docs {
            d.validate(self.vocab_size())?;
        }
        Ok(())
    }

    /// Writes vocabulary, feature, count, label and (optionally) split files.
    pub fn save(&self, dir: &Path, split: Option<&CorpusSplit>) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(VOCAB_FILE), io::format_vocab(&self.vocab))?;
        fs::write(
            dir.join(FEATURES_FILE),
            io::format_triplets(&self.docs, self.vocab_size(), TripletField::Weights),
        )?;
        fs::write(
            dir.join(COUNTS_FILE),
            io::format_triplets(&self.docs, self.vocab_size(), TripletField::Counts),
        )?;
        fs::write(dir.join(LABELS_FILE), io::format_labels(&self.docs))?;
        let mut names = self.label_names.join("\n");
        if !names.is_empty() {
            names.push('\n');
        }
        fs::write(dir.join(LABEL_NAMES_FILE), names)?;
        if let Some(split) = split {
            fs::write(dir.join(SPLIT_FILE), io::format_split(split))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Corpus> {
        let path = |f: &str| dir.join(f);
        let show = |f: &str| path(f).display().to_string();
        let vocab = io::parse_vocab(&io::read_text(&path(VOCAB_FILE))?, &show(VOCAB_FILE))?;
        let weights =
            io::parse_triplets(&io::read_text(&path(FEATURES_FILE))?, &show(FEATURES_FILE))?;
        if weights.vocab_size != vocab.len() {
            return Err(NashError::Mismatch(format!(
                "features declare vocabulary size {} but vocabulary has {} terms",
                weights.vocab_size,
                vocab.len()
            )));
        }
        let counts = if path(COUNTS_FILE).exists() {
            Some(io::parse_triplets(
                &io::read_text(&path(COUNTS_FILE))?,
                &show(COUNTS_FILE),
            )?)
        } else {
            None
        };
        let labels = if path(LABELS_FILE).exists() {
            Some(io::parse_labels(
                &io::read_text(&path(LABELS_FILE))?,
                &show(LABELS_FILE),
            )?)
        } else {
            None
        };
        let label_names = if path(LABEL_NAMES_FILE).exists() {
            io::read_text(&path(LABEL_NAMES_FILE))?
                .lines()
                .map(str::to_string)
                .collect()
        } else {
            Vec::new()
        };
        let docs = io::assemble_documents(&weights, counts.as_ref(), labels.as_ref())?;
        let corpus = Corpus {
            vocab,
            docs,
            label_names,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    /// Imports precomputed features (`<doc_id> <term_id> <weight>`) with an
    /// optional labels sidecar. Terms are named `t<id>`; document
    /// frequencies are recounted from the rows.
    pub fn import_features(features: &Path, labels: Option<&Path>) -> Result<Corpus> {
        let weights =
            io::parse_triplets(&io::read_text(features)?, &features.display().to_string())?;
        let labels = match labels {
            Some(p) => Some(io::parse_labels(
                &io::read_text(p)?,
                &p.display().to_string(),
            )?),
            None => None,
        };
        let docs = io::assemble_documents(&weights, None, labels.as_ref())?;
        let mut df = vec![0u32; weights.vocab_size];
        for d in &docs {
            for &(t, _) in &d.entries {
                df[t as usize] += 1;
            }
        }
        let terms = (0..weights.vocab_size).map(|i| format!("t{i}")).collect();
        let num_classes = docs
            .iter()
            .filter_map(|d| d.label)
            .max()
            .map_or(0, |m| m + 1);
        let corpus = Corpus {
            vocab: Vocabulary::from_parts(terms, df)?,
            docs,
            label_names: (0..num_classes).map(|c| c.to_string()).collect(),
        };
        if corpus.docs.is_empty() {
            return Err(NashError::Corpus(
                "no usable documents in feature file".into(),
            ));
        }
        Ok(corpus)
    }
}

pub fn load_split(dir: &Path) -> Result<CorpusSplit> {
    let p = dir.join(SPLIT_FILE);
    io::parse_split(&io::read_text(&p)?, &p.display().to_string())
}
