//! Synthetic corpora with known structure, for tests, benchmarks and demos.

use rand::distr::weighted::WeightedIndex;

use crate::corpus::{Corpus, CorpusOptions};
use crate::error::{NashError, Result};
use crate::nn::Rng;

fn build(tokens: Vec<Vec<String>>, labels: Vec<String>) -> Result<Corpus> {
    let options = CorpusOptions {
        max_vocab: usize::MAX,
        min_df: 1,
    };
    Corpus::from_tokens(
        &tokens,
        labels.iter().map(|l| Some(l.as_str())).collect(),
        &options,
    )
}

/// Weights `1/r` for ranks `r = 1..=n`.
fn zipf(n: usize) -> Vec<f64> {
    (0..n).map(|r| 1.0 / (r as f64 + 1.0)).collect()
}

fn weighted(weights: &[f64]) -> WeightedIndex<f64> {
    WeightedIndex::new(weights).expect("positive weights")
}

/// Disjoint-vocabulary topics plus shared noise words.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterSpec {
    pub topics: usize,
    pub docs: usize,
    pub topic_words: usize,
    pub noise_words: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Probability that a token is drawn from the document's topic.
    pub topic_share: f64,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        ClusterSpec {
            topics: 3,
            docs: 300,
            topic_words: 50,
            noise_words: 100,
            min_len: 20,
            max_len: 60,
            topic_share: 0.7,
        }
    }
}

/// Documents cycle through the topics; every token is a topic word with
/// probability `topic_share` and a shared noise word otherwise. Word
/// frequencies within each group are Zipfian. Label names are `topic<k>`.
pub fn cluster_corpus(spec: &ClusterSpec, seed: u64) -> Result<Corpus> {
    if spec.topics == 0 || spec.topic_words == 0 || spec.min_len == 0 || spec.max_len < spec.min_len
    {
        return Err(NashError::Config("invalid cluster corpus spec".into()));
    }
    let root = Rng::new(seed);
    let topic_dist = weighted(&zipf(spec.topic_words));
    let noise_dist = (spec.noise_words > 0).then(|| weighted(&zipf(spec.noise_words)));
    let mut tokens = Vec::with_capacity(spec.docs);
    let mut labels = Vec::with_capacity(spec.docs);
    for i in 0..spec.docs {
        let mut rng = root.derive(&[i as u64]);
        let topic = i % spec.topics;
        let len = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
        let doc: Vec<String> = (0..len)
            .map(|_| match &noise_dist {
                Some(noise) if rng.uniform() >= spec.topic_share => {
                    format!("noise{}", rng.sample(noise))
                }
                _ => format!("topic{topic}word{}", rng.sample(&topic_dist)),
            })
            .collect();
        tokens.push(doc);
        labels.push(format!("topic{topic}"));
    }
    build(tokens, labels)
}

/// Each document is about one planted word pair: both words occur several
/// times, surrounded by shared noise. Label = pair index (`pair<k>`).
pub fn planted_pair_corpus(
    pairs: usize,
    docs_per_pair: usize,
    noise_words: usize,
    seed: u64,
) -> Result<Corpus> {
    if pairs == 0 || docs_per_pair == 0 || noise_words == 0 {
        return Err(NashError::Config("invalid planted-pair corpus spec".into()));
    }
    let root = Rng::new(seed);
    let mut tokens = Vec::new();
    let mut labels = Vec::new();
    for i in 0..pairs * docs_per_pair {
        let mut rng = root.derive(&[i as u64]);
        let pair = i % pairs;
        let mut doc = Vec::new();
        for _ in 0..3 + rng.below(4) {
            doc.push(format!("pair{pair}a"));
            doc.push(format!("pair{pair}b"));
        }
        for _ in 0..10 + rng.below(10) {
            doc.push(format!("noise{}", rng.below(noise_words)));
        }
        tokens.push(doc);
        labels.push(format!("pair{pair}"));
    }
    build(tokens, labels)
}

/// Partner word of a planted-pair term, if it is one.
pub fn planted_partner(term: &str) -> Option<String> {
    let stem = term.strip_prefix("pair")?;
    if let Some(k) = stem.strip_suffix('a') {
        Some(format!("pair{k}b"))
    } else {
        stem.strip_suffix('b').map(|k| format!("pair{k}a"))
    }
}

/// Overlapping-topic corpus with a Zipfian background, shaped like a small
/// newsgroup subset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopicSpec {
    pub classes: usize,
    pub vocab: usize,
    pub docs: usize,
    /// Distinctive words per class (drawn with overlap between classes).
    pub class_words: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Token shares of the own class topic and of one other class topic; the
    /// rest comes from the background.
    pub own_share: f64,
    pub other_share: f64,
}

impl Default for TopicSpec {
    fn default() -> Self {
        TopicSpec {
            classes: 5,
            vocab: 2000,
            docs: 2500,
            class_words: 300,
            min_len: 40,
            max_len: 160,
            own_share: 0.15,
            other_share: 0.1,
        }
    }
}

/// Words are `w<id>`; labels are `class<c>`. Vocabulary ids of the built
/// corpus follow document frequency, not the generator's ids.
pub fn topic_corpus(spec: &TopicSpec, seed: u64) -> Result<Corpus> {
    if spec.classes < 2 || spec.vocab == 0 || spec.class_words == 0 || spec.class_words > spec.vocab
    {
        return Err(NashError::Config("invalid topic corpus spec".into()));
    }
    if spec.min_len == 0 || spec.max_len < spec.min_len || spec.own_share + spec.other_share > 1.0 {
        return Err(NashError::Config("invalid topic corpus spec".into()));
    }
    let root = Rng::new(seed);
    let mut layout = root.derive(&[u64::MAX]);

    let mut background_order: Vec<usize> = (0..spec.vocab).collect();
    layout.shuffle(&mut background_order);
    let background = weighted(&zipf(spec.vocab));

    let class_topics: Vec<Vec<usize>> = (0..spec.classes)
        .map(|_| {
            let mut ids: Vec<usize> = (0..spec.vocab).collect();
            layout.shuffle(&mut ids);
            ids.truncate(spec.class_words);
            ids
        })
        .collect();
    let topic_dist = weighted(&zipf(spec.class_words));

    let mut tokens = Vec::with_capacity(spec.docs);
    let mut labels = Vec::with_capacity(spec.docs);
    for i in 0..spec.docs {
        let mut rng = root.derive(&[i as u64]);
        let class = i % spec.classes;
        let other = (class + 1 + rng.below(spec.classes - 1)) % spec.classes;
        let len = spec.min_len + rng.below(spec.max_len - spec.min_len + 1);
        let doc: Vec<String> = (0..len)
            .map(|_| {
                let u = rng.uniform();
                let id = if u < spec.own_share {
                    class_topics[class][rng.sample(&topic_dist)]
                } else if u < spec.own_share + spec.other_share {
                    class_topics[other][rng.sample(&topic_dist)]
                } else {
                    background_order[rng.sample(&background)]
                };
                format!("w{id}")
            })
            .collect();
        tokens.push(doc);
        labels.push(format!("class{class}"));
    }
    build(tokens, labels)
}
