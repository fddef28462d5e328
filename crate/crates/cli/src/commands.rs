use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use nash_core::analysis::{
    dump_codes, encode_listing, format_neighborhood, format_rd_csv, nearest_words,
    rate_distortion_curve, RateField, WordMetric,
};
use nash_core::corpus::{
    self, io::read_raw_corpus, split_corpus, Corpus, CorpusSplit, DocumentVector,
};
use nash_core::model::NashParams;
use nash_core::nn::Checkpoint;
use nash_core::par::Parallelism;
use nash_core::retrieval::{
    build_index, format_precision, format_results, precision_at_k, search_all,
};
use nash_core::synth::{cluster_corpus, planted_pair_corpus, topic_corpus, ClusterSpec, TopicSpec};
use nash_core::train::{load_model, model_checkpoint, EpochRecord, TrainConfig, Trainer};
use nash_core::{NashError, Result};

use crate::manifest::RunManifest;
use crate::settings::Settings;
use crate::{Cli, Command};

pub const MODEL_FILE: &str = "model.ckpt";
pub const STATE_FILE: &str = "state.ckpt";
pub const METRICS_FILE: &str = "metrics.log";
pub const ABLATION_FILE: &str = "ablation.tsv";

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// Raw corpus with one `<label>\t<text>` document per line (`-` marks
    /// an unlabeled document).
    #[arg(
        long,
        required_unless_present = "features",
        conflicts_with = "features"
    )]
    pub input: Option<PathBuf>,
    /// Precomputed sparse features (`#dims` header, then
    /// `<doc_id> <term_id> <weight>` lines) instead of raw text.
    #[arg(long)]
    pub features: Option<PathBuf>,
    /// Labels sidecar (`<doc_id> <label_id>` lines) for --features.
    #[arg(long, requires = "features")]
    pub labels: Option<PathBuf>,
    /// Keep at most this many terms, by document frequency.
    #[arg(long)]
    pub max_vocab: Option<usize>,
    /// Drop terms occurring in fewer documents.
    #[arg(long)]
    pub min_df: Option<u32>,
    /// Train, validation and test fractions, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub split: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus directory written by `build`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Code length; a comma-separated list runs a sweep with one
    /// subdirectory per length.
    #[arg(long, value_delimiter = ',')]
    pub bits: Vec<usize>,
    /// Train with the label classifier.
    #[arg(long)]
    pub supervised: bool,
    /// Weight of the classification loss.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Maximum number of epochs.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Documents per update.
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Initial Adam learning rate.
    #[arg(long)]
    pub learning_rate: Option<f64>,
    /// Decoder noise: none, fixed or data-dependent.
    #[arg(long)]
    pub noise: Option<String>,
    /// Binarization: stochastic, deterministic or identity.
    #[arg(long)]
    pub binarization: Option<String>,
    /// Any config key as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Continue from a training-state checkpoint.
    #[arg(long, conflicts_with = "bits")]
    pub resume: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Corpus directory written by `build`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Model or training-state checkpoint.
    #[arg(long)]
    pub model: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitSel {
    All,
    Train,
    Valid,
    Test,
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Documents to encode.
    #[arg(long, value_enum, default_value_t = SplitSel::All)]
    pub split: SplitSel,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Number of retrieved documents per query.
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    /// Split whose documents act as queries.
    #[arg(long, value_enum, default_value_t = SplitSel::Test)]
    pub queries: SplitSel,
    /// Also write ranked neighbors (`query\trank\tdoc\tdistance`).
    #[arg(long)]
    pub results: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Binarization,
    Noise,
    EncoderDepth,
    DecoderDepth,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    /// Corpus directory written by `build`.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Axes to vary, comma separated.
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Axis::Binarization, Axis::Noise, Axis::EncoderDepth, Axis::DecoderDepth])]
    pub axes: Vec<Axis>,
    /// Hidden width of the encoder and decoder layers added along the depth
    /// axes.
    #[arg(long, default_value_t = 500)]
    pub width: usize,
    /// Number of retrieved documents per query.
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    /// Maximum number of epochs per variant.
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Any config key as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricSel {
    Cosine,
    Euclidean,
}

#[derive(Debug, Args)]
pub struct WordsArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Query word; repeatable.
    #[arg(long, required = true)]
    pub probe: Vec<String>,
    /// Neighbors per probe.
    #[arg(short, long, default_value_t = 10)]
    pub n: usize,
    /// Distance between embedding columns.
    #[arg(long, value_enum, default_value_t = MetricSel::Cosine)]
    pub metric: MetricSel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RateSel {
    Sampled,
    Map,
}

#[derive(Debug, Args)]
pub struct RdCurveArgs {
    /// Metrics log written by `train`.
    #[arg(long)]
    pub log: PathBuf,
    /// Rate at sampled codes or at the most likely code.
    #[arg(long, value_enum, default_value_t = RateSel::Sampled)]
    pub rate: RateSel,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Three topics with disjoint vocabularies plus shared noise words.
    Cluster,
    /// Five overlapping classes over a 2000-word vocabulary.
    Topic,
    /// Documents built around planted word pairs.
    Pairs,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKind,
    /// Raw corpus file to write.
    #[arg(long)]
    pub output: PathBuf,
}

pub fn run(cli: &Cli) -> Result<()> {
    let mut settings = Settings::load(cli.global.config.as_deref())?;
    if let Some(seed) = cli.global.seed {
        settings.set("seed", &seed.to_string())?;
    }
    let par = Parallelism::new(cli.global.threads)?;
    let out = cli.global.out_dir.as_path();
    match &cli.command {
        Command::Build(a) => build(a, settings, out),
        Command::Train(a) => train(a, settings, out, &par),
        Command::Encode(a) => encode(a, &settings, &par, false),
        Command::DumpCodes(a) => encode(a, &settings, &par, true),
        Command::Eval(a) => eval(a, &settings, &par),
        Command::Ablate(a) => ablate(a, settings, out, &par),
        Command::Words(a) => words(a, &settings),
        Command::RdCurve(a) => rd_curve(a),
        Command::Synth(a) => synth(a, &settings),
    }
}

fn emit(text: &str, output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text)?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn build(a: &BuildArgs, mut settings: Settings, out: &Path) -> Result<()> {
    if let Some(v) = a.max_vocab {
        settings.set("max_vocab", &v.to_string())?;
    }
    if let Some(v) = a.min_df {
        settings.set("min_df", &v.to_string())?;
    }
    if let Some(r) = &a.split {
        for (k, v) in ["train_ratio", "valid_ratio", "test_ratio"].iter().zip(r) {
            settings.set(k, &v.to_string())?;
        }
    }
    let ratios = settings.build.split_ratios()?;
    let seed = settings.train.seed;
    let mut manifest = RunManifest::new("build", seed, settings.build.format());
    let corpus = match (&a.input, &a.features) {
        (Some(input), _) => {
            manifest.add_input(input)?;
            Corpus::from_raw(&read_raw_corpus(input)?, &settings.build.options)?
        }
        (None, Some(features)) => {
            manifest.add_input(features)?;
            if let Some(l) = &a.labels {
                manifest.add_input(l)?;
            }
            Corpus::import_features(features, a.labels.as_deref())?
        }
        (None, None) => {
            return Err(NashError::Config(
                "either --input or --features is required".into(),
            ))
        }
    };
    let split = split_corpus(&corpus.docs, ratios, seed)?;
    manifest.artifacts = [
        corpus::VOCAB_FILE,
        corpus::FEATURES_FILE,
        corpus::COUNTS_FILE,
        corpus::LABELS_FILE,
        corpus::LABEL_NAMES_FILE,
        corpus::SPLIT_FILE,
    ]
    .map(String::from)
    .to_vec();
    corpus.save(out, Some(&split))?;
    manifest.write(out)?;
    println!(
        "documents={} vocabulary={} classes={} train={} valid={} test={}",
        corpus.docs.len(),
        corpus.vocab_size(),
        corpus.num_classes(),
        split.train.len(),
        split.valid.len(),
        split.test.len()
    );
    Ok(())
}

fn corpus_inputs(manifest: &mut RunManifest, dir: &Path) -> Result<()> {
    for f in [
        corpus::VOCAB_FILE,
        corpus::FEATURES_FILE,
        corpus::COUNTS_FILE,
        corpus::LABELS_FILE,
        corpus::SPLIT_FILE,
    ] {
        let p = dir.join(f);
        if p.exists() {
            manifest.add_input(&p)?;
        }
    }
    Ok(())
}

fn load_corpus(dir: &Path) -> Result<(Corpus, CorpusSplit)> {
    let corpus = Corpus::load(dir)?;
    let split = corpus::load_split(dir)?;
    Ok((corpus, split))
}

fn train(a: &TrainArgs, mut settings: Settings, out: &Path, par: &Parallelism) -> Result<()> {
    let (corpus, split) = load_corpus(&a.corpus)?;
    if let Some(path) = &a.resume {
        let ckpt = Checkpoint::load(path)?;
        let trainer = Trainer::resume(&corpus, &split, &ckpt, par.clone())?;
        let config = trainer.config().clone();
        let mut manifest = RunManifest::new("train", config.seed, config.format());
        manifest.add_input(path)?;
        corpus_inputs(&mut manifest, &a.corpus)?;
        return run_training(trainer, manifest, out);
    }
    if a.supervised {
        settings.set("supervised", "true")?;
    }
    let flags = [
        ("alpha", a.alpha.map(|v| v.to_string())),
        ("max_epochs", a.epochs.map(|v| v.to_string())),
        ("batch_size", a.batch_size.map(|v| v.to_string())),
        ("learning_rate", a.learning_rate.map(|v| v.to_string())),
        ("noise", a.noise.clone()),
        ("binarization", a.binarization.clone()),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            settings.set(k, &v)?;
        }
    }
    for o in &a.overrides {
        settings.apply(o)?;
    }
    let lengths = if a.bits.is_empty() {
        vec![settings.train.bits]
    } else {
        a.bits.clone()
    };
    for &bits in &lengths {
        let config = TrainConfig {
            bits,
            ..settings.train.clone()
        };
        config.validate()?;
        let dir = if lengths.len() > 1 {
            out.join(format!("bits-{bits}"))
        } else {
            out.to_path_buf()
        };
        let mut manifest = RunManifest::new("train", config.seed, config.format());
        corpus_inputs(&mut manifest, &a.corpus)?;
        let trainer = Trainer::new(&corpus, &split, &config, par.clone())?;
        run_training(trainer, manifest, &dir)?;
    }
    Ok(())
}

fn run_training(mut trainer: Trainer<'_>, mut manifest: RunManifest, dir: &Path) -> Result<()> {
    manifest.artifacts = [MODEL_FILE, STATE_FILE, METRICS_FILE]
        .map(String::from)
        .to_vec();
    manifest.write(dir)?;
    let result = trainer.run(|t, r: &EpochRecord| {
        fs::write(dir.join(METRICS_FILE), t.report().metrics_log())?;
        if t.report().best_epoch == Some(r.epoch) {
            model_checkpoint(t.best(), t.config()).save(&dir.join(MODEL_FILE))?;
        }
        Ok(())
    });
    fs::write(dir.join(METRICS_FILE), trainer.report().metrics_log())?;
    model_checkpoint(trainer.best(), trainer.config()).save(&dir.join(MODEL_FILE))?;
    if let Err(e) = result {
        manifest.write(dir)?;
        eprintln!("last good model kept in {}", dir.join(MODEL_FILE).display());
        return Err(e);
    }
    trainer.state_checkpoint().save(&dir.join(STATE_FILE))?;
    manifest.write(dir)?;
    let report = trainer.report();
    let best = report
        .best_val_precision
        .map_or_else(|| "na".into(), |p| format!("{p:.4}"));
    let best_epoch = report
        .best_epoch
        .map_or_else(|| "na".into(), |e| e.to_string());
    println!(
        "{}: bits={} epochs={} best_epoch={best_epoch} best_val_precision={best} stopped_early={}",
        dir.display(),
        trainer.config().bits,
        report.records.len(),
        report.stopped_early
    );
    Ok(())
}

/// Loads a checkpoint and checks it against the corpus and any explicitly
/// configured code length.
fn load_checked(
    settings: &Settings,
    corpus: &Corpus,
    path: &Path,
) -> Result<(NashParams, TrainConfig)> {
    let (params, config) = load_model(&Checkpoint::load(path)?)?;
    if settings.is_explicit("bits") && settings.train.bits != config.bits {
        return Err(NashError::Mismatch(format!(
            "configured code length {} but the checkpoint has {}",
            settings.train.bits, config.bits
        )));
    }
    if params.vocab_size() != corpus.vocab_size() {
        return Err(NashError::Mismatch(format!(
            "checkpoint expects {} terms but the corpus has {}",
            params.vocab_size(),
            corpus.vocab_size()
        )));
    }
    Ok((params, config))
}

fn select<'c>(
    corpus: &'c Corpus,
    split: &CorpusSplit,
    sel: SplitSel,
) -> Result<Vec<&'c DocumentVector>> {
    match sel {
        SplitSel::All => Ok(corpus.docs.iter().collect()),
        SplitSel::Train => corpus.select(&split.train),
        SplitSel::Valid => corpus.select(&split.valid),
        SplitSel::Test => corpus.select(&split.test),
    }
}

fn encode(a: &EncodeArgs, settings: &Settings, par: &Parallelism, with_labels: bool) -> Result<()> {
    let (corpus, split) = load_corpus(&a.model.corpus)?;
    let (params, _) = load_checked(settings, &corpus, &a.model.model)?;
    let docs = select(&corpus, &split, a.split)?;
    let text = if with_labels {
        dump_codes(&params, &docs, &corpus.label_names, par)?
    } else {
        encode_listing(&params, &docs, par)?
    };
    emit(&text, a.output.as_deref())
}

fn eval(a: &EvalArgs, settings: &Settings, par: &Parallelism) -> Result<()> {
    let (corpus, split) = load_corpus(&a.model.corpus)?;
    let (params, _) = load_checked(settings, &corpus, &a.model.model)?;
    let queries = select(&corpus, &split, a.queries)?;
    let database = corpus.select(&split.train)?;
    let p = precision_at_k(&params, &queries, &database, a.k, par)?;
    if let Some(path) = &a.results {
        let q = build_index(&params, &queries, par)?;
        let db = build_index(&params, &database, par)?;
        emit(&format_results(&search_all(&q, &db, a.k, par)?), Some(path))?;
    }
    println!("{}", format_precision(a.k, p));
    Ok(())
}

type Variant = (&'static str, Box<dyn Fn(&mut TrainConfig)>);

fn ablation_settings(axis: Axis, width: usize) -> Vec<Variant> {
    match axis {
        Axis::Binarization => vec![
            (
                "stochastic",
                Box::new(|c: &mut TrainConfig| c.set("binarization", "stochastic").unwrap()),
            ),
            (
                "deterministic",
                Box::new(|c: &mut TrainConfig| c.set("binarization", "deterministic").unwrap()),
            ),
        ],
        Axis::Noise => ["none", "fixed", "data-dependent"]
            .into_iter()
            .map(|n| {
                (
                    n,
                    Box::new(move |c: &mut TrainConfig| c.set("noise", n).unwrap())
                        as Box<dyn Fn(&mut TrainConfig)>,
                )
            })
            .collect(),
        Axis::EncoderDepth | Axis::DecoderDepth => ["0", "1", "2"]
            .into_iter()
            .enumerate()
            .map(|(depth, name)| {
                let f = move |c: &mut TrainConfig| {
                    let layers = vec![width; depth];
                    if axis == Axis::EncoderDepth {
                        c.encoder_hidden = layers;
                    } else {
                        c.decoder_hidden = layers;
                    }
                };
                (name, Box::new(f) as Box<dyn Fn(&mut TrainConfig)>)
            })
            .collect(),
    }
}

fn axis_name(axis: Axis) -> &'static str {
    match axis {
        Axis::Binarization => "binarization",
        Axis::Noise => "noise",
        Axis::EncoderDepth => "encoder-depth",
        Axis::DecoderDepth => "decoder-depth",
    }
}

fn ablate(a: &AblateArgs, mut settings: Settings, out: &Path, par: &Parallelism) -> Result<()> {
    if let Some(e) = a.epochs {
        settings.set("max_epochs", &e.to_string())?;
    }
    for o in &a.overrides {
        settings.apply(o)?;
    }
    let base = settings.train.clone();
    base.validate()?;
    let (corpus, split) = load_corpus(&a.corpus)?;
    let queries = corpus.select(&split.test)?;
    let database = corpus.select(&split.train)?;
    let mut manifest = RunManifest::new("ablate", base.seed, base.format());
    corpus_inputs(&mut manifest, &a.corpus)?;
    manifest.artifacts.push(ABLATION_FILE.into());
    let logs = out.join("ablate");
    manifest.write(out)?;
    let mut table = format!("axis\tsetting\tprecision_at_{}\tbest_epoch\n", a.k);
    for &axis in &a.axes {
        for (name, apply) in ablation_settings(axis, a.width) {
            let mut config = base.clone();
            apply(&mut config);
            let mut trainer = Trainer::new(&corpus, &split, &config, par.clone())?;
            trainer.run(|_, _| Ok(()))?;
            let log_name = format!("ablate/{}-{name}.log", axis_name(axis));
            fs::create_dir_all(&logs)?;
            fs::write(out.join(&log_name), trainer.report().metrics_log())?;
            manifest.artifacts.push(log_name);
            let best_epoch = trainer
                .report()
                .best_epoch
                .map_or_else(|| "na".into(), |e| e.to_string());
            let p = precision_at_k(trainer.best(), &queries, &database, a.k, par)?;
            let row = format!("{}\t{name}\t{p:.4}\t{best_epoch}\n", axis_name(axis));
            print!("{row}");
            table.push_str(&row);
        }
    }
    fs::write(out.join(ABLATION_FILE), &table)?;
    manifest.write(out)
}

fn words(a: &WordsArgs, settings: &Settings) -> Result<()> {
    let (corpus, _) = load_corpus(&a.model.corpus)?;
    let (params, _) = load_checked(settings, &corpus, &a.model.model)?;
    let metric = match a.metric {
        MetricSel::Cosine => WordMetric::Cosine,
        MetricSel::Euclidean => WordMetric::Euclidean,
    };
    let mut text = String::new();
    for probe in &a.probe {
        text.push_str(&format_neighborhood(&nearest_words(
            &params,
            &corpus.vocab,
            probe,
            a.n,
            metric,
        )?));
    }
    emit(&text, None)
}

fn rd_curve(a: &RdCurveArgs) -> Result<()> {
    let log = fs::read_to_string(&a.log)?;
    let field = match a.rate {
        RateSel::Sampled => RateField::Sampled,
        RateSel::Map => RateField::Map,
    };
    emit(
        &format_rd_csv(&rate_distortion_curve(&log, field)?),
        a.output.as_deref(),
    )
}

/// Raw-corpus text of a bag-of-words corpus; each term is repeated by its
/// count.
fn raw_text(corpus: &Corpus) -> String {
    let mut out = String::new();
    for d in &corpus.docs {
        let label = d
            .label
            .and_then(|l| corpus.label_names.get(l as usize))
            .map_or("-", String::as_str);
        let words: Vec<&str> = d
            .raw_counts
            .iter()
            .flat_map(|&(t, c)| {
                std::iter::repeat_n(corpus.vocab.term(t).unwrap_or("?"), c as usize)
            })
            .collect();
        let _ = writeln!(out, "{label}\t{}", words.join(" "));
    }
    out
}

fn synth(a: &SynthArgs, settings: &Settings) -> Result<()> {
    let seed = settings.train.seed;
    let corpus = match a.kind {
        SynthKind::Cluster => cluster_corpus(&ClusterSpec::default(), seed)?,
        SynthKind::Topic => topic_corpus(&TopicSpec::default(), seed)?,
        SynthKind::Pairs => planted_pair_corpus(20, 10, 200, seed)?,
    };
    emit(&raw_text(&corpus), Some(&a.output))?;
    println!(
        "documents={} vocabulary={}",
        corpus.docs.len(),
        corpus.vocab_size()
    );
    Ok(())
}
