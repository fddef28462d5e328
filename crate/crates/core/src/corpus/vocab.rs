use std::collections::HashMap;

use crate::error::{NashError, Result};

/// Frozen token ↔ id bijection with document frequencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    terms: Vec<String>,
    doc_freq: Vec<u32>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds from parallel term/df lists. Terms must be unique.
    pub fn from_parts(terms: Vec<String>, doc_freq: Vec<u32>) -> Result<Self> {
        if terms.len() != doc_freq.len() {
            return Err(NashError::Corpus(format!(
                "{} terms but {} document frequencies",
                terms.len(),
                doc_freq.len()
            )));
        }
        let mut index = HashMap::with_capacity(terms.len());
        for (id, t) in terms.iter().enumerate() {
            if index.insert(t.clone(), id as u32).is_some() {
                return Err(NashError::Corpus(format!(
                    "duplicate vocabulary term `{t}`"
                )));
            }
        }
        Ok(Vocabulary {
            terms,
            doc_freq,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn id(&self, term: &str) -> Option<u32> {
        self.index.get(term).copied()
    }

    pub fn term(&self, id: u32) -> Option<&str> {
        self.terms.get(id as usize).map(String::as_str)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self, id: u32) -> u32 {
        self.doc_freq[id as usize]
    }

    pub fn doc_freqs(&self) -> &[u32] {
        &self.doc_freq
    }
}

/// Keeps the `max_size` terms with the highest document frequency among
/// those with `df >= min_df`. Ties go to the lexicographically smaller term.
pub fn build_vocabulary(docs: &[Vec<String>], max_size: usize, min_df: u32) -> Result<Vocabulary> {
    if docs.is_empty() {
        return Err(NashError::Corpus("empty corpus".into()));
    }
    if max_size == 0 {
        return Err(NashError::Config("vocabulary max_size must be >= 1".into()));
    }
    let mut df: HashMap<&str, u32> = HashMap::new();
    for doc in docs {
        let mut seen: Vec<&str> = doc.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    let mut ranked: Vec<(&str, u32)> = df
        .into_iter()
        .filter(|&(_, n)| n >= min_df.max(1))
        .collect();
    if ranked.is_empty() {
        return Err(NashError::Corpus(
            "no terms survive filtering; all documents are empty".into(),
        ));
    }
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_size);
    let (terms, freqs): (Vec<String>, Vec<u32>) =
        ranked.into_iter().map(|(t, n)| (t.to_string(), n)).unzip();
    Vocabulary::from_parts(terms, freqs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(raw: &[&[&str]]) -> Vec<Vec<String>> {
        raw.iter()
            .map(|d| d.iter().map(|s| s.to_string()).collect())
            .collect()
    }

    #[test]
    fn ties_broken_lexicographically() {
        let v = build_vocabulary(&docs(&[&["a", "b"], &["b", "c"]]), 2, 1).unwrap();
        assert_eq!(v.terms(), &["b".to_string(), "a".to_string()]);
        assert_eq!(v.doc_freqs(), &[2, 1]);
        assert_eq!(v.id("a"), Some(1));
        assert_eq!(v.id("c"), None);
    }

    #[test]
    fn single_term() {
        let v = build_vocabulary(&docs(&[&["x"]]), 10, 1).unwrap();
        assert_eq!(v.len(), 1);
    }

    #[test]
    fn doc_freq_counts_documents_not_tokens() {
        let v = build_vocabulary(&docs(&[&["a", "a", "a"], &["b"]]), 10, 1).unwrap();
        assert_eq!(v.doc_freq(v.id("a").unwrap()), 1);
    }

    #[test]
    fn min_df_filters() {
        let v = build_vocabulary(&docs(&[&["a", "b"], &["a"]]), 10, 2).unwrap();
        assert_eq!(v.terms(), &["a".to_string()]);
        assert!(build_vocabulary(&docs(&[&["a"], &["b"]]), 10, 2).is_err());
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(build_vocabulary(&[], 10, 1).is_err());
        assert!(build_vocabulary(&docs(&[&[], &[]]), 10, 1).is_err());
        assert!(build_vocabulary(&docs(&[&["a"]]), 0, 1).is_err());
    }

    #[test]
    fn bijection() {
        let v = build_vocabulary(&docs(&[&["q", "w", "e"], &["w", "r"]]), 10, 1).unwrap();
        for id in 0..v.len() as u32 {
            assert_eq!(v.id(v.term(id).unwrap()), Some(id));
        }
    }
}
