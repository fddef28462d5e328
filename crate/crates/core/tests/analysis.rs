use nash_core::analysis::{class_distance_stats, nearest_words, WordMetric};
use nash_core::corpus::{split_corpus, CorpusSplit, SplitRatios};
use nash_core::par::Parallelism;
use nash_core::retrieval::build_index;
use nash_core::synth::{cluster_corpus, planted_pair_corpus, planted_partner, ClusterSpec};
use nash_core::train::{train, TrainConfig};

#[test]
fn planted_partners_are_nearest_words() {
    let corpus = planted_pair_corpus(20, 10, 200, 0).unwrap();
    let split = CorpusSplit {
        train: corpus.docs.iter().map(|d| d.doc_id).collect(),
        valid: Vec::new(),
        test: Vec::new(),
        seed: 0,
    };
    let config = TrainConfig {
        encoder_hidden: vec![64],
        batch_size: 20,
        learning_rate: 0.01,
        max_epochs: 30,
        ..TrainConfig::default()
    };
    let (params, _) = train(&corpus, &split, &config, &Parallelism::sequential()).unwrap();
    let probes: Vec<&String> = corpus
        .vocab
        .terms()
        .iter()
        .filter(|t| planted_partner(t).is_some())
        .collect();
    assert_eq!(probes.len(), 40);
    let hits = probes
        .iter()
        .filter(|p| {
            let n = nearest_words(&params, &corpus.vocab, p, 5, WordMetric::Cosine).unwrap();
            let partner = planted_partner(p).unwrap();
            n.neighbors.iter().any(|(w, _)| *w == partner)
        })
        .count();
    assert!(
        hits as f64 >= 0.8 * probes.len() as f64,
        "{hits}/{}",
        probes.len()
    );
}

#[test]
fn same_topic_codes_are_closer() {
    let corpus = cluster_corpus(&ClusterSpec::default(), 4).unwrap();
    let split = split_corpus(&corpus.docs, SplitRatios::new(0.8, 0.1, 0.1).unwrap(), 4).unwrap();
    let config = TrainConfig {
        batch_size: 10,
        max_epochs: 10,
        seed: 4,
        ..TrainConfig::default()
    };
    let par = Parallelism::sequential();
    let (params, _) = train(&corpus, &split, &config, &par).unwrap();
    let docs: Vec<_> = corpus.docs.iter().collect();
    let index = build_index(&params, &docs, &par).unwrap();
    let (intra, inter) = class_distance_stats(&index).unwrap();
    assert!(intra < inter, "intra {intra} inter {inter}");
}
