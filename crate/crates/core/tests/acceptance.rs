//! Acceptance suite. Every test prints one `criterion N: PASS|FAIL` line
//! straight to stdout, so the lines show even when output is captured.

#![allow(clippy::needless_range_loop)]

use std::collections::HashMap;
use std::io::Write;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::{Duration, Instant};

use nash_core::corpus::{
    split_corpus, Corpus, CorpusOptions, CorpusSplit, DocumentVector, SplitRatios,
};
use nash_core::model::{
    batch_loss, binarize_stochastic, kl_bernoulli, loss_and_grads, Architecture, Binarization,
    Draws, HashCode, NashParams, NoiseMode, Objective,
};
use nash_core::nn::{grad_check, GradCheckOptions, ParamSet, Rng};
use nash_core::par::Parallelism;
use nash_core::retrieval::{
    hamming_topk, hamming_topk_naive, lsh_baseline, precision_at_k, CodeIndex,
};
use nash_core::synth::{cluster_corpus, topic_corpus, ClusterSpec, TopicSpec};
use nash_core::train::{model_checkpoint, train, EpochRecord, TrainConfig, TrainReport, Trainer};

fn report(n: u32, name: &str, pass: bool, detail: &str) {
    let line = format!(
        "criterion {n} ({name}): {} {detail}\n",
        if pass { "PASS" } else { "FAIL" }
    );
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
    assert!(pass, "{line}");
}

fn random_docs(
    rng: &mut Rng,
    n: usize,
    vocab: usize,
    classes: Option<usize>,
) -> Vec<DocumentVector> {
    (0..n)
        .map(|i| {
            let mut terms: Vec<u32> = (0..vocab as u32).collect();
            rng.shuffle(&mut terms);
            let mut terms = terms[..(2 + rng.below(5)).min(vocab)].to_vec();
            terms.sort_unstable();
            let raw_counts: Vec<(u32, f64)> = terms
                .iter()
                .map(|&t| (t, 1.0 + rng.below(4) as f64))
                .collect();
            let norm = raw_counts.iter().map(|&(_, c)| c * c).sum::<f64>().sqrt();
            DocumentVector {
                doc_id: i as u32,
                entries: raw_counts.iter().map(|&(t, c)| (t, c / norm)).collect(),
                label: classes.map(|c| rng.below(c) as u32),
                raw_counts,
            }
        })
        .collect()
}

/// Largest relative error over the blocks whose names start with one of
/// `only` (all blocks when empty).
fn grad_error(
    params: &NashParams,
    docs: &[DocumentVector],
    draws: &Draws,
    obj: &Objective,
    only: &[&str],
) -> f64 {
    let refs: Vec<&DocumentVector> = docs.iter().collect();
    let (_, grads) = loss_and_grads(params, &refs, draws, obj).unwrap();
    let mut p = params.clone();
    let options = GradCheckOptions {
        step: 1e-5,
        tolerance: 1e-4,
        abs_floor: 1e-4,
        max_per_block: Some(60),
    };
    let r = grad_check(
        &mut p,
        &grads,
        |q| batch_loss(q, &refs, draws, obj).unwrap(),
        &options,
    );
    r.blocks
        .iter()
        .filter(|b| only.is_empty() || only.iter().any(|o| b.name.starts_with(o)))
        .map(|b| b.max_rel_error)
        .fold(0.0, f64::max)
}

fn random_instance(rng: &mut Rng) -> (Architecture, usize) {
    let classes = 2 + rng.below(3);
    let arch = Architecture {
        vocab_size: 10 + rng.below(41),
        bits: 2 + rng.below(7),
        encoder_hidden: vec![3 + rng.below(6)],
        decoder_hidden: if rng.below(2) == 0 {
            vec![]
        } else {
            vec![3 + rng.below(4)]
        },
        classifier_hidden: if rng.below(2) == 0 {
            vec![]
        } else {
            vec![3 + rng.below(4)]
        },
        num_classes: Some(classes),
        noise_head: true,
    };
    (arch, classes)
}

/// Initialized parameters with nonzero biases, so no ReLU input sits
/// exactly on its kink.
fn random_params(arch: &Architecture, rng: &mut Rng) -> NashParams {
    let mut p = NashParams::init(arch, rng, (0.3f64).powi(2).ln()).unwrap();
    for t in p.tensors_mut() {
        if t.name.ends_with("bias") {
            for v in t.data.iter_mut() {
                *v += rng.uniform_range(-0.2, 0.2);
            }
        }
    }
    p
}

#[test]
fn criterion_01_exact_gradient_paths() {
    let started = Instant::now();
    let mut rng = Rng::new(101);
    let (mut worst_downstream, mut worst_kl) = (0.0f64, 0.0f64);
    let instances = 20;
    for i in 0..instances {
        let (arch, classes) = random_instance(&mut rng);
        let p = random_params(&arch, &mut rng);
        let docs = random_docs(&mut rng, 4, arch.vocab_size, Some(classes));
        let mut obj = Objective {
            binarization: Binarization::Stochastic,
            noise: NoiseMode::DataDependent,
            prior: 0.5,
            alpha: 0.1 + rng.uniform(),
            dropout_rate: 0.0,
            recon_weight: 1.0,
            kl_weight: 1.0,
        };
        let mut rngs: Vec<Rng> = (0..docs.len() as u64)
            .map(|d| rng.derive(&[i, d]))
            .collect();
        let draws = Draws::sample(&p, &obj, &mut rngs, true);
        let downstream = [
            "noise_head",
            "decoder",
            "embedding",
            "word_bias",
            "classifier",
        ];
        worst_downstream = worst_downstream.max(grad_error(&p, &docs, &draws, &obj, &downstream));

        obj.recon_weight = 0.0;
        obj.alpha = 0.0;
        obj.prior = 0.1 + 0.8 * rng.uniform();
        worst_kl = worst_kl.max(grad_error(&p, &docs, &draws, &obj, &["encoder", "logits"]));
    }
    let elapsed = started.elapsed();
    let pass = worst_downstream < 1e-4 && worst_kl < 1e-4 && elapsed < Duration::from_secs(30);
    let detail = format!(
        "{instances} instances, decoder/classifier/noise-head max rel err {worst_downstream:.2e}, \
         KL max rel err {worst_kl:.2e}, {:.1}s",
        elapsed.as_secs_f64()
    );
    report(1, "gradient correctness", pass, &detail);
}

/// Encoder gradient of a 2-bit linear model with deterministic codes, coded
/// directly from the chain rule.
fn hand_chain(p: &NashParams, x: &[f64], counts: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (vocab, bits) = (x.len(), 2);
    let logit: Vec<f64> = (0..bits)
        .map(|j| {
            (0..vocab)
                .map(|v| x[v] * p.logits.weight[[v, j]])
                .sum::<f64>()
                + p.logits.bias[j]
        })
        .collect();
    let h: Vec<f64> = logit.iter().map(|&t| 1.0 / (1.0 + (-t).exp())).collect();
    let z: Vec<f64> = h.iter().map(|&v| if v > 0.5 { 1.0 } else { 0.0 }).collect();
    let u: Vec<f64> = (0..vocab)
        .map(|w| (0..bits).map(|k| z[k] * p.embedding[[k, w]]).sum::<f64>() + p.word_bias[w])
        .collect();
    let s: f64 = u.iter().map(|v| v.exp()).sum();
    let n: f64 = counts.iter().sum();
    let du: Vec<f64> = (0..vocab).map(|w| n * u[w].exp() / s - counts[w]).collect();
    let dz: Vec<f64> = (0..bits)
        .map(|k| (0..vocab).map(|w| p.embedding[[k, w]] * du[w]).sum())
        .collect();
    let dlogit: Vec<f64> = (0..bits).map(|k| dz[k] * h[k] * (1.0 - h[k])).collect();
    let dw = (0..vocab)
        .map(|v| (0..bits).map(|j| x[v] * dlogit[j]).collect())
        .collect();
    (dw, dlogit)
}

#[test]
fn criterion_02_straight_through_contract() {
    let mut rng = Rng::new(202);
    let mut worst_identity = 0.0f64;
    for i in 0..10 {
        let (mut arch, classes) = random_instance(&mut rng);
        arch.encoder_hidden = vec![3 + rng.below(5), 3 + rng.below(5)];
        let p = random_params(&arch, &mut rng);
        let docs = random_docs(&mut rng, 4, arch.vocab_size, Some(classes));
        let obj = Objective {
            binarization: Binarization::Identity,
            noise: NoiseMode::DataDependent,
            prior: 0.5,
            alpha: 0.5,
            dropout_rate: 0.2,
            recon_weight: 1.0,
            kl_weight: 1.0,
        };
        let mut rngs: Vec<Rng> = (0..docs.len() as u64)
            .map(|d| rng.derive(&[i, d]))
            .collect();
        let draws = Draws::sample(&p, &obj, &mut rngs, true);
        worst_identity = worst_identity.max(grad_error(&p, &docs, &draws, &obj, &[]));
    }

    let arch = Architecture {
        vocab_size: 3,
        bits: 2,
        encoder_hidden: vec![],
        decoder_hidden: vec![],
        classifier_hidden: vec![],
        num_classes: None,
        noise_head: false,
    };
    let mut p = NashParams::zeros(&arch);
    p.logits.weight =
        ndarray::Array2::from_shape_vec((3, 2), vec![0.4, -0.7, 1.1, 0.2, -0.3, 0.9]).unwrap();
    p.logits.bias[0] = 0.1;
    p.logits.bias[1] = -0.2;
    p.embedding =
        ndarray::Array2::from_shape_vec((2, 3), vec![0.5, -0.4, 0.3, -0.6, 0.8, 0.2]).unwrap();
    p.word_bias[2] = 0.25;
    let doc = DocumentVector {
        doc_id: 0,
        entries: vec![(0, 0.6), (2, 0.8)],
        label: None,
        raw_counts: vec![(0, 3.0), (2, 4.0)],
    };
    let obj = Objective {
        binarization: Binarization::Deterministic,
        noise: NoiseMode::None,
        prior: 0.5,
        alpha: 0.0,
        dropout_rate: 0.0,
        recon_weight: 1.0,
        kl_weight: 0.0,
    };
    let (_, g) = loss_and_grads(&p, &[&doc], &Draws::inference(1, 2), &obj).unwrap();
    let (dw, db) = hand_chain(&p, &[0.6, 0.0, 0.8], &[3.0, 0.0, 4.0]);
    let mut chain_err = 0.0f64;
    for v in 0..3 {
        for j in 0..2 {
            chain_err = chain_err.max((g.logits.weight[[v, j]] - dw[v][j]).abs());
        }
    }
    for j in 0..2 {
        chain_err = chain_err.max((g.logits.bias[j] - db[j]).abs());
    }
    let pass = worst_identity < 1e-4 && chain_err < 1e-12;
    let detail = format!(
        "identity-mode max rel err {worst_identity:.2e} over all blocks; 2-bit chain abs err {chain_err:.1e}"
    );
    report(2, "straight-through contract", pass, &detail);
}

#[test]
fn criterion_03_kl_identity() {
    let mut rng = Rng::new(303);
    let n = 100_000;
    let mut worst = 0.0f64;
    let mut pass = true;
    for _ in 0..10 {
        let bits = 1 + rng.below(8);
        let h: Vec<f64> = (0..bits).map(|_| 0.02 + 0.96 * rng.uniform()).collect();
        let gamma: Vec<f64> = vec![0.05 + 0.9 * rng.uniform(); bits];
        let exact = kl_bernoulli(&h, &gamma).unwrap();
        let (mut sum, mut sq) = (0.0, 0.0);
        for _ in 0..n {
            let (z, _) = binarize_stochastic(&h, &mut rng).unwrap();
            let v: f64 = (0..bits)
                .map(|i| {
                    if z.get(i) {
                        (h[i] / gamma[i]).ln()
                    } else {
                        ((1.0 - h[i]) / (1.0 - gamma[i])).ln()
                    }
                })
                .sum();
            sum += v;
            sq += v * v;
        }
        let mean = sum / n as f64;
        let se = ((sq / n as f64 - mean * mean) / n as f64).sqrt();
        let z = (mean - exact).abs() / se;
        worst = worst.max(z);
        pass &= z < 3.0;
    }
    report(
        3,
        "KL identity",
        pass,
        &format!("10 (h, prior) pairs, worst deviation {worst:.2} SE"),
    );
}

#[test]
fn criterion_04_retrieval_exactness() {
    let started = Instant::now();
    let mut rng = Rng::new(404);
    let lengths = [8, 16, 32, 64, 128];
    let mut mismatches = 0;
    for i in 0..1000 {
        let bits = lengths[i % lengths.len()];
        let n = 1 + rng.below(500);
        // A few active bits make ties common.
        let active = 1 + rng.below(bits.min(12));
        let draw = |rng: &mut Rng| {
            let mut c = HashCode::zeros(bits).unwrap();
            for b in 0..active {
                c.set(b * (bits / active), rng.below(2) == 1);
            }
            if rng.below(4) == 0 {
                c.set(rng.below(bits), true);
            }
            c
        };
        let rows: Vec<(u32, HashCode)> = (0..n)
            .map(|j| ((j * 7 + i) as u32, draw(&mut rng)))
            .collect();
        let index =
            CodeIndex::from_codes(bits, rows.iter().map(|(id, c)| (*id, None, *c)).collect())
                .unwrap();
        let query = draw(&mut rng);
        let k = 1 + rng.below(n + 5);
        let fast = hamming_topk(&index, &query, k).unwrap();
        if fast.neighbors != hamming_topk_naive(&rows, &query, k) {
            mismatches += 1;
        }
    }
    let elapsed = started.elapsed();
    let pass = mismatches == 0 && elapsed < Duration::from_secs(10);
    let detail = format!(
        "1000 instances, {mismatches} mismatches, {:.2}s",
        elapsed.as_secs_f64()
    );
    report(4, "retrieval exactness", pass, &detail);
}

struct ClusterRun {
    report: TrainReport,
    precision: f64,
    lsh: f64,
}

fn cluster_runs() -> &'static (Vec<ClusterRun>, Duration) {
    static RUNS: OnceLock<(Vec<ClusterRun>, Duration)> = OnceLock::new();
    RUNS.get_or_init(|| {
        let started = Instant::now();
        let par = Parallelism::sequential();
        let runs = (0..3)
            .map(|seed| {
                let corpus = cluster_corpus(&ClusterSpec::default(), seed).unwrap();
                let split =
                    split_corpus(&corpus.docs, SplitRatios::new(0.8, 0.1, 0.1).unwrap(), seed)
                        .unwrap();
                let config = TrainConfig {
                    bits: 16,
                    batch_size: 10,
                    max_epochs: 20,
                    seed,
                    ..TrainConfig::default()
                };
                let (params, report) = train(&corpus, &split, &config, &par).unwrap();
                let queries = corpus.select(&split.test).unwrap();
                let database = corpus.select(&split.train).unwrap();
                let precision = precision_at_k(&params, &queries, &database, 10, &par).unwrap();
                let lq = lsh_baseline(&queries, 16, seed).unwrap();
                let ldb = lsh_baseline(&database, 16, seed).unwrap();
                let lsh =
                    nash_core::retrieval::precision_from_indices(&lq, &ldb, 10, &par).unwrap();
                ClusterRun {
                    report,
                    precision,
                    lsh,
                }
            })
            .collect();
        (runs, started.elapsed())
    })
}

#[test]
fn criterion_05_cluster_recovery() {
    let (runs, elapsed) = cluster_runs();
    let mean = runs.iter().map(|r| r.precision).sum::<f64>() / runs.len() as f64;
    let lsh_lower = runs.iter().all(|r| r.lsh < r.precision);
    let pass = mean >= 0.95 && lsh_lower && *elapsed < Duration::from_secs(120);
    let per_seed: Vec<String> = runs
        .iter()
        .map(|r| format!("{:.3}/{:.3}", r.precision, r.lsh))
        .collect();
    let detail = format!(
        "mean p@10 {mean:.4}, per seed NASH-DN/LSH {}, {:.1}s",
        per_seed.join(" "),
        elapsed.as_secs_f64()
    );
    report(5, "cluster recovery", pass, &detail);
}

/// Desk-scale runs: five overlapping classes, 2000 training documents,
/// 2000-term vocabulary, 16-bit codes, three seeds.
struct DeskRun {
    test_precision: f64,
    val_precision: f64,
}

fn desk_config(seed: u64) -> TrainConfig {
    TrainConfig {
        bits: 16,
        batch_size: 50,
        max_epochs: 30,
        seed,
        ..TrainConfig::default()
    }
}

fn desk_corpus(seed: u64) -> &'static (Corpus, CorpusSplit) {
    static CORPORA: OnceLock<Vec<(Corpus, CorpusSplit)>> = OnceLock::new();
    &CORPORA.get_or_init(|| {
        (0..3)
            .map(|s| {
                let corpus = topic_corpus(&TopicSpec::default(), s).unwrap();
                let split = split_corpus(&corpus.docs, SplitRatios::new(0.8, 0.1, 0.1).unwrap(), s)
                    .unwrap();
                (corpus, split)
            })
            .collect()
    })[seed as usize]
}

/// Mean over three seeds of a variant, computed once per process.
fn desk(variant: &str) -> Arc<Vec<DeskRun>> {
    type Cache = Mutex<HashMap<String, Arc<OnceLock<Arc<Vec<DeskRun>>>>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let cell = CACHE
        .get_or_init(Default::default)
        .lock()
        .unwrap()
        .entry(variant.to_string())
        .or_default()
        .clone();
    cell.get_or_init(|| {
        let par = Parallelism::sequential();
        let runs = (0..3)
            .map(|seed| {
                let (corpus, split) = desk_corpus(seed);
                let mut config = desk_config(seed);
                for kv in variant.split(';').filter(|s| !s.is_empty()) {
                    let (k, v) = kv.split_once('=').unwrap();
                    config.set(k, v).unwrap();
                }
                let (params, report) = train(corpus, split, &config, &par).unwrap();
                let queries = corpus.select(&split.test).unwrap();
                let database = corpus.select(&split.train).unwrap();
                DeskRun {
                    test_precision: precision_at_k(&params, &queries, &database, 100, &par)
                        .unwrap(),
                    val_precision: report.best_val_precision.unwrap(),
                }
            })
            .collect();
        Arc::new(runs)
    })
    .clone()
}

fn mean_test(runs: &[DeskRun]) -> f64 {
    runs.iter().map(|r| r.test_precision).sum::<f64>() / runs.len() as f64
}

fn mean_val(runs: &[DeskRun]) -> f64 {
    runs.iter().map(|r| r.val_precision).sum::<f64>() / runs.len() as f64
}

#[test]
fn criterion_06_variant_ordering() {
    let dn = mean_test(&desk(""));
    let n = mean_test(&desk("noise=fixed"));
    let plain = mean_test(&desk("noise=none"));
    let pass = dn >= n && n >= plain - 0.01;
    let detail = format!("mean p@100 NASH-DN {dn:.4}, NASH-N {n:.4}, NASH {plain:.4}");
    report(6, "variant ordering", pass, &detail);
}

#[test]
fn criterion_07_stochastic_beats_deterministic() {
    let stochastic = mean_test(&desk(""));
    let deterministic = mean_test(&desk("binarization=deterministic"));
    let detail = format!("mean p@100 stochastic {stochastic:.4}, deterministic {deterministic:.4}");
    report(
        7,
        "stochastic binarization",
        stochastic > deterministic,
        &detail,
    );
}

#[test]
fn criterion_08_linear_decoder_beats_mlp() {
    let linear = mean_test(&desk(""));
    let mlp = mean_test(&desk("decoder_hidden=100,100"));
    let detail = format!("mean p@100 linear {linear:.4}, two-layer {mlp:.4}");
    report(8, "decoder depth", linear > mlp, &detail);
}

#[test]
fn criterion_09_supervision_helps() {
    let unsupervised = mean_test(&desk(""));
    // The weight is chosen by validation precision, as a user would.
    let candidates: Vec<(f64, Arc<Vec<DeskRun>>)> = [0.01, 0.1, 1.0]
        .iter()
        .map(|&a| (a, desk(&format!("supervised=true;alpha={a}"))))
        .collect();
    let (alpha, runs) = candidates
        .iter()
        .max_by(|a, b| mean_val(&a.1).total_cmp(&mean_val(&b.1)))
        .unwrap();
    let supervised = mean_test(runs);
    let all: Vec<String> = candidates
        .iter()
        .map(|(a, r)| format!("alpha={a}: val {:.4} test {:.4}", mean_val(r), mean_test(r)))
        .collect();
    let detail = format!(
        "NASH-DN {unsupervised:.4}, NASH-DN-S (alpha={alpha}, chosen on validation) {supervised:.4} [{}]",
        all.join(", ")
    );
    report(9, "supervised gain", supervised > unsupervised, &detail);
}

#[test]
fn criterion_10_determinism() {
    let raw = nash_core::corpus::io::parse_raw_corpus(
        &cluster_text(&cluster_corpus(&ClusterSpec::default(), 10).unwrap()),
        "synthetic",
    )
    .unwrap();
    let run = || {
        let corpus = Corpus::from_raw(&raw, &CorpusOptions::default()).unwrap();
        let split =
            split_corpus(&corpus.docs, SplitRatios::new(0.8, 0.1, 0.1).unwrap(), 10).unwrap();
        let config = TrainConfig {
            encoder_hidden: vec![64, 64],
            batch_size: 20,
            max_epochs: 4,
            seed: 10,
            ..TrainConfig::default()
        };
        let mut t = Trainer::new(&corpus, &split, &config, Parallelism::sequential()).unwrap();
        t.run(|_, _| Ok(())).unwrap();
        let mut state = Vec::new();
        t.state_checkpoint().write_to(&mut state).unwrap();
        let mut model = Vec::new();
        model_checkpoint(t.best(), t.config())
            .write_to(&mut model)
            .unwrap();
        (model, state, t.report().metrics_log())
    };
    let a = run();
    let b = run();
    let pass = a == b && !a.2.is_empty();
    let detail = format!(
        "two runs: model {} bytes, state {} bytes, metrics {} lines, identical={}",
        a.0.len(),
        a.1.len(),
        a.2.lines().count(),
        a == b
    );
    report(10, "determinism", pass, &detail);
}

fn cluster_text(corpus: &Corpus) -> String {
    let mut out = String::new();
    for d in &corpus.docs {
        out.push_str(&corpus.label_names[d.label.unwrap() as usize]);
        out.push('\t');
        for &(t, c) in &d.raw_counts {
            for _ in 0..c as usize {
                out.push_str(corpus.vocab.term(t).unwrap());
                out.push(' ');
            }
        }
        out.push('\n');
    }
    out
}

#[test]
fn criterion_11_rate_bound() {
    let (runs, _) = cluster_runs();
    let records: Vec<&EpochRecord> = runs.iter().flat_map(|r| &r.report.records).collect();
    let worst = records.iter().map(|r| r.rate_map_max).fold(0.0, f64::max);
    let pass = !records.is_empty() && records.iter().all(|r| r.rate_map_max <= 16.0);
    let detail = format!(
        "{} logged epochs, largest per-document MAP rate {worst:.3} bits (l = 16)",
        records.len()
    );
    report(11, "rate bound", pass, &detail);
}
