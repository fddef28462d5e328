use super::*;
use crate::corpus::{split_corpus, SplitRatios};
use crate::synth::{cluster_corpus, ClusterSpec};

fn small_config(seed: u64) -> TrainConfig {
    TrainConfig {
        bits: 16,
        encoder_hidden: vec![64, 64],
        batch_size: 50,
        max_epochs: 4,
        seed,
        ..TrainConfig::default()
    }
}

fn setup(seed: u64) -> (Corpus, CorpusSplit) {
    let corpus = cluster_corpus(&ClusterSpec::default(), seed).unwrap();
    let split = split_corpus(&corpus.docs, SplitRatios::new(0.8, 0.1, 0.1).unwrap(), seed).unwrap();
    (corpus, split)
}

#[test]
fn loss_decreases_on_clustered_corpus() {
    for seed in 0..3 {
        let (corpus, split) = setup(seed);
        let config = TrainConfig {
            max_epochs: 20,
            patience: 100,
            batch_size: 10,
            seed,
            ..TrainConfig::default()
        };
        let (_, report) = train(&corpus, &split, &config, &Parallelism::sequential()).unwrap();
        let loss = |r: &EpochRecord| r.loss_recon + r.loss_kl;
        let first = loss(&report.records[0]);
        let last = loss(report.records.last().unwrap());
        // The decoder bias starts at the unigram log-probabilities, so only the
        // topical part of the loss is left to learn.
        assert!(last <= 0.95 * first, "seed {seed}: {first} -> {last}");
        let epochs: Vec<usize> = report.records.iter().map(|r| r.epoch).collect();
        assert_eq!(epochs, (1..=20).collect::<Vec<_>>());
    }
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let (corpus, split) = setup(7);
    let config = small_config(7);
    let run = |threads: usize| {
        let mut t =
            Trainer::new(&corpus, &split, &config, Parallelism::new(threads).unwrap()).unwrap();
        t.run(|_, _| Ok(())).unwrap();
        let mut bytes = Vec::new();
        t.state_checkpoint().write_to(&mut bytes).unwrap();
        let (best, report) = t.finish();
        (best, report, bytes)
    };
    let a = run(1);
    let b = run(1);
    let c = run(3);
    assert_eq!(a.0, b.0);
    assert_eq!(a.1, b.1);
    assert_eq!(a.2, b.2);
    assert_eq!(a.2, c.2);
    assert_eq!(a.1.metrics_log(), c.1.metrics_log());
}

#[test]
fn resume_continues_bit_identically() {
    let (corpus, split) = setup(3);
    let config = small_config(3);
    let mut straight = Trainer::new(&corpus, &split, &config, Parallelism::sequential()).unwrap();
    straight.run(|_, _| Ok(())).unwrap();

    let mut first = Trainer::new(&corpus, &split, &config, Parallelism::sequential()).unwrap();
    first.run_epoch().unwrap();
    first.run_epoch().unwrap();
    let mut bytes = Vec::new();
    first.state_checkpoint().write_to(&mut bytes).unwrap();
    let ckpt = Checkpoint::read_from(&mut bytes.as_slice()).unwrap();
    let mut resumed = Trainer::resume(&corpus, &split, &ckpt, Parallelism::sequential()).unwrap();
    resumed.run(|_, _| Ok(())).unwrap();

    assert_eq!(resumed.params(), straight.params());
    assert_eq!(resumed.best(), straight.best());
    assert_eq!(resumed.report(), straight.report());
}

#[test]
fn rate_at_map_code_is_bounded() {
    let (corpus, split) = setup(1);
    let (_, report) = train(
        &corpus,
        &split,
        &small_config(1),
        &Parallelism::sequential(),
    )
    .unwrap();
    for r in &report.records {
        assert!(r.rate_map_max <= 16.0, "{r:?}");
        assert!(r.rate_map <= r.rate_map_max);
        assert!(r.val_precision.is_some());
    }
}

#[test]
fn validate_examples() {
    let (mut corpus, split) = setup(2);
    let params = NashParams::init(
        &small_config(2).architecture(corpus.vocab_size(), 3),
        &mut Rng::new(0),
        0.0,
    )
    .unwrap();
    let par = Parallelism::sequential();
    let p = validate(&params, &corpus, &split, 100, &par).unwrap();
    assert!((0.0..=1.0).contains(&p));
    for d in &mut corpus.docs {
        d.label = Some(0);
    }
    assert_eq!(validate(&params, &corpus, &split, 100, &par).unwrap(), 1.0);
    corpus.docs[0].label = None;
    assert!(matches!(
        validate(&params, &corpus, &split, 100, &par),
        Err(NashError::Validation(_))
    ));
}

#[test]
fn divergence_keeps_last_good_model() {
    let (corpus, split) = setup(4);
    let config = TrainConfig {
        learning_rate: 1e300,
        ..small_config(4)
    };
    let mut t = Trainer::new(&corpus, &split, &config, Parallelism::sequential()).unwrap();
    let err = t.run(|_, _| Ok(())).unwrap_err();
    assert!(matches!(err, NashError::Diverged { .. }), "{err}");
    assert!(t.best().first_non_finite().is_none());
}

#[test]
fn empty_validation_keeps_final_model() {
    let (corpus, mut split) = setup(5);
    split.train.append(&mut split.valid);
    split.train.sort_unstable();
    let config = TrainConfig {
        max_epochs: 2,
        ..small_config(5)
    };
    let mut t = Trainer::new(&corpus, &split, &config, Parallelism::sequential()).unwrap();
    t.run(|_, _| Ok(())).unwrap();
    assert_eq!(t.best(), t.params());
    assert!(t.report().records.iter().all(|r| r.val_precision.is_none()));
}

#[test]
fn supervised_run_logs_discriminative_loss() {
    let (corpus, split) = setup(6);
    let config = TrainConfig {
        supervised: true,
        classifier_hidden: vec![32],
        max_epochs: 2,
        ..small_config(6)
    };
    let (best, report) = train(&corpus, &split, &config, &Parallelism::sequential()).unwrap();
    assert!(best.is_supervised());
    assert!(report.records.iter().all(|r| r.loss_dis > 0.0));
}

#[test]
fn rejects_bad_inputs() {
    let (corpus, mut split) = setup(8);
    let bad = TrainConfig {
        bits: 10,
        ..small_config(8)
    };
    assert!(Trainer::new(&corpus, &split, &bad, Parallelism::sequential()).is_err());
    split.train.clear();
    assert!(Trainer::new(&corpus, &split, &small_config(8), Parallelism::sequential()).is_err());
}
