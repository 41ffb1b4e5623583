//! `corpusclean`: batch front end for the corpus cleaning library.

mod settings;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use corpusclean::corpus_io::{read_documents, write_shards, OnError};
use corpusclean::lang_id::train_lid;
use corpusclean::lexicons::SpecialChars;
use corpusclean::ngram_lm::{save_arpa, train_lm_with, LmOptions};
use corpusclean::pipeline::{
    benchmark, clean_corpus, export_features, report_from_partitions, threshold_clean, CleanReport, ThresholdRuleSet,
};
use corpusclean::{Lexicons, LidModel, Resources};

use settings::{ResourcePaths, Settings};

const EXIT_USAGE: u8 = 64;
const EXIT_FATAL: u8 = 1;
const EXIT_PARTIAL: u8 = 2;

#[derive(Parser)]
#[command(
    name = "corpusclean",
    about = "Clean multilingual text corpora by anomaly detection over document quality features",
    disable_version_flag = true,
    after_help = "Every flag has a config-file key `section.key` and an environment variable \
                  DCAD_SECTION_KEY. Precedence: defaults < --config file < environment < flags."
)]
struct Cli {
    /// Print the version and the hash of the resolved configuration.
    #[arg(short = 'V', long, global = true)]
    version: bool,

    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Full anomaly-detection clean into keep/ and remove/ files plus report.tsv.
    Clean(CleanArgs),
    /// Write one JSON feature row per document.
    Features(FeaturesArgs),
    /// Baseline clean with fixed per-feature bounds.
    ThresholdClean(ThresholdCleanArgs),
    /// Train an n-gram language model and write it in ARPA format.
    TrainLm(TrainLmArgs),
    /// Train a character n-gram language identifier.
    TrainLid(TrainLidArgs),
    /// Clean and also write the per-document feature/score/label CSV.
    Scatter(ScatterArgs),
    /// Rebuild report.tsv from the keep/ and remove/ files of a finished run.
    Report(ReportArgs),
    /// Time the threshold baseline against the anomaly pipeline.
    Bench(BenchArgs),
    /// Split inputs round-robin into shard files with a manifest.
    Shard(ShardArgs),
    /// Write a seeded synthetic corpus with labelled noise and its word lists.
    Synth(SynthArgs),
}

#[derive(Args, Default)]
struct ConfigArgs {
    /// TOML settings file (also DCAD_CONFIG).
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
}

#[derive(Args, Default)]
struct InputArgs {
    /// JSON Lines input files or glob patterns [run.input].
    #[arg(short, long, value_name = "PATH", num_args = 1..)]
    input: Vec<String>,
}

impl InputArgs {
    fn apply(&self, s: &mut Settings) {
        if !self.input.is_empty() {
            s.set("run.input", self.input.join(","));
        }
    }
}

#[derive(Args, Default)]
struct OutArgs {
    /// Output directory [run.out].
    #[arg(short, long, value_name = "DIR")]
    out: Option<PathBuf>,
}

impl OutArgs {
    fn apply(&self, s: &mut Settings) {
        s.set_opt("run.out", &self.out.as_ref().map(|p| p.display().to_string()));
    }
}

#[derive(Args, Default)]
struct OutputFileArgs {
    /// Output file [output.path].
    #[arg(long, value_name = "FILE")]
    output: Option<PathBuf>,
}

impl OutputFileArgs {
    fn apply(&self, s: &mut Settings) {
        s.set_opt("output.path", &self.output.as_ref().map(|p| p.display().to_string()));
    }
}

#[derive(Args, Default)]
struct RunArgs {
    /// Malformed lines: skip (log and count) or abort [run.on_error, default skip].
    #[arg(long, value_name = "MODE")]
    on_error: Option<String>,
    /// Add dcad_features, dcad_score and dcad_label to output lines [run.annotate, default false].
    #[arg(long, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    annotate: Option<bool>,
    /// Languages with fewer documents pass through unfiltered [run.min_docs, default 32].
    #[arg(long, value_name = "N")]
    min_docs: Option<usize>,
    /// Most vectors a detector is fitted on; larger languages are sampled [run.fit_cap, default 100000].
    #[arg(long, value_name = "N")]
    fit_cap: Option<usize>,
    /// per-language or global standardization [run.stats_scope, default per-language].
    #[arg(long, value_name = "SCOPE")]
    stats_scope: Option<String>,
    /// Same as --stats-scope global.
    #[arg(long)]
    global_stats: bool,
    /// Bytes of buffered feature rows before spilling to disk [run.memory_budget, default 1073741824].
    #[arg(long, value_name = "BYTES")]
    memory_budget: Option<usize>,
    /// Documents per feature-extraction batch [run.batch_size, default 4096].
    #[arg(long, value_name = "N")]
    batch_size: Option<usize>,
    /// Worker threads; 0 uses every core [run.workers, default 0].
    #[arg(long, value_name = "N")]
    workers: Option<usize>,
    /// Directory for spill files [run.spill_dir, default system temp].
    #[arg(long, value_name = "DIR")]
    spill_dir: Option<PathBuf>,
}

impl RunArgs {
    fn apply(&self, s: &mut Settings) {
        s.set_opt("run.on_error", &self.on_error);
        s.set_opt("run.annotate", &self.annotate);
        s.set_opt("run.min_docs", &self.min_docs);
        s.set_opt("run.fit_cap", &self.fit_cap);
        s.set_opt("run.stats_scope", &self.stats_scope);
        if self.global_stats {
            s.set("run.stats_scope", "global");
        }
        s.set_opt("run.memory_budget", &self.memory_budget);
        s.set_opt("run.batch_size", &self.batch_size);
        s.set_opt("run.workers", &self.workers);
        s.set_opt("run.spill_dir", &self.spill_dir.as_ref().map(|p| p.display().to_string()));
    }
}

#[derive(Args, Default)]
struct ResourceArgs {
    /// Directory of <lang>.arpa language models [resources.models_dir].
    #[arg(long, value_name = "DIR")]
    models_dir: Option<PathBuf>,
    /// Language identifier written by train-lid [resources.lid_model].
    #[arg(long, value_name = "FILE")]
    lid_model: Option<PathBuf>,
    /// Directory of <lang>.txt stopword lists [resources.stopwords_dir].
    #[arg(long, value_name = "DIR")]
    stopwords_dir: Option<PathBuf>,
    /// Directory of <lang>.txt flagged-word lists [resources.flagged_dir].
    #[arg(long, value_name = "DIR")]
    flagged_dir: Option<PathBuf>,
    /// Special-character list, one char or U+XXXX per line [resources.special_chars].
    #[arg(long, value_name = "FILE")]
    special_chars: Option<PathBuf>,
}

impl ResourceArgs {
    fn apply(&self, s: &mut Settings) {
        let p = |v: &Option<PathBuf>| v.as_ref().map(|p| p.display().to_string());
        s.set_opt("resources.models_dir", &p(&self.models_dir));
        s.set_opt("resources.lid_model", &p(&self.lid_model));
        s.set_opt("resources.stopwords_dir", &p(&self.stopwords_dir));
        s.set_opt("resources.flagged_dir", &p(&self.flagged_dir));
        s.set_opt("resources.special_chars", &p(&self.special_chars));
    }
}

#[derive(Args, Default)]
struct FeatureArgs {
    /// Character k-gram length for r_char_rep [features.char_gram, default 10].
    #[arg(long, value_name = "K")]
    char_gram: Option<usize>,
    /// Word k-gram length for r_word_rep [features.word_gram, default 2].
    #[arg(long, value_name = "K")]
    word_gram: Option<usize>,
    /// Tokenizer overrides, e.g. "tha_Thai=words,xyz_Latn=chars" [features.tokenizer].
    #[arg(long, value_name = "LIST")]
    tokenizer: Option<String>,
}

impl FeatureArgs {
    fn apply(&self, s: &mut Settings) {
        s.set_opt("features.char_gram", &self.char_gram);
        s.set_opt("features.word_gram", &self.word_gram);
        s.set_opt("features.tokenizer", &self.tokenizer);
    }
}

#[derive(Args, Default)]
struct DetectorArgs {
    /// iforest, lof or kmeans [detector.algorithm, default iforest].
    #[arg(long, value_name = "NAME")]
    algorithm: Option<String>,
    /// Fraction of documents removed per language, in (0, 1) [detector.contamination, default 0.0769].
    #[arg(long, value_name = "FRACTION")]
    contamination: Option<f64>,
    /// Fixed score threshold instead of the contamination quantile [detector.tau].
    #[arg(long, value_name = "SCORE", allow_hyphen_values = true)]
    tau: Option<f64>,
    /// Isolation trees [detector.trees, default 100].
    #[arg(long, value_name = "N")]
    trees: Option<usize>,
    /// Isolation tree subsample size [detector.psi, default 256].
    #[arg(long, value_name = "N")]
    psi: Option<usize>,
    /// LOF neighbours [detector.lof_k, default 20].
    #[arg(long, value_name = "K")]
    lof_k: Option<usize>,
    /// K-Means clusters [detector.kmeans_clusters, default 8].
    #[arg(long, value_name = "K")]
    kmeans_clusters: Option<usize>,
    /// K-Means iteration limit [detector.kmeans_iters, default 100].
    #[arg(long, value_name = "N")]
    kmeans_iters: Option<usize>,
    /// Seed for every random choice [detector.seed, default 42].
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Drop a feature from detection, numbered 1..8 in the order n_words,
    /// r_char_rep, r_word_rep, r_special, r_stop, r_flag, s_lid, s_ppl
    /// (so 7 drops s_lid). Repeatable [detector.ablate_feature].
    #[arg(long, value_name = "I")]
    ablate_feature: Vec<usize>,
}

impl DetectorArgs {
    fn apply(&self, s: &mut Settings) {
        s.set_opt("detector.algorithm", &self.algorithm);
        s.set_opt("detector.contamination", &self.contamination);
        s.set_opt("detector.tau", &self.tau);
        s.set_opt("detector.trees", &self.trees);
        s.set_opt("detector.psi", &self.psi);
        s.set_opt("detector.lof_k", &self.lof_k);
        s.set_opt("detector.kmeans_clusters", &self.kmeans_clusters);
        s.set_opt("detector.kmeans_iters", &self.kmeans_iters);
        s.set_opt("detector.seed", &self.seed);
        if !self.ablate_feature.is_empty() {
            let v: Vec<String> = self.ablate_feature.iter().map(usize::to_string).collect();
            s.set("detector.ablate_feature", v.join(","));
        }
    }
}

#[derive(Args, Default)]
struct RuleArgs {
    /// Comma-separated bounds such as "n_words>=5,r_flag<=0.1"; "none" for no
    /// bounds [threshold.rules, default n_words>=5,r_word_rep<=0.8,r_special<=0.5,r_flag<=0.3].
    #[arg(long, value_name = "RULES")]
    rules: Option<String>,
}

impl RuleArgs {
    fn apply(&self, s: &mut Settings) {
        s.set_opt("threshold.rules", &self.rules);
    }
}

#[derive(Args)]
struct CleanArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    out: OutArgs,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    resources: ResourceArgs,
    #[command(flatten)]
    features: FeatureArgs,
    #[command(flatten)]
    detector: DetectorArgs,
}

impl CleanArgs {
    fn apply(&self, s: &mut Settings) {
        self.input.apply(s);
        self.out.apply(s);
        self.run.apply(s);
        self.resources.apply(s);
        self.features.apply(s);
        self.detector.apply(s);
    }
}

#[derive(Args)]
struct ScatterArgs {
    #[command(flatten)]
    clean: CleanArgs,
    /// CSV destination [output.scatter].
    #[arg(long, value_name = "FILE")]
    scatter: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    clean: CleanArgs,
    #[command(flatten)]
    rules: RuleArgs,
}

#[derive(Args)]
struct ThresholdCleanArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    out: OutArgs,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    resources: ResourceArgs,
    #[command(flatten)]
    features: FeatureArgs,
    #[command(flatten)]
    rules: RuleArgs,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputFileArgs,
    #[command(flatten)]
    run: RunArgs,
    #[command(flatten)]
    resources: ResourceArgs,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args)]
struct TrainLmArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputFileArgs,
    #[command(flatten)]
    features: FeatureArgs,
    /// Train on documents of this language [lm.lang].
    #[arg(long, value_name = "LANG")]
    lang: Option<String>,
    /// N-gram order [lm.order, default 3].
    #[arg(long, value_name = "N")]
    order: Option<usize>,
    /// Warn below this many training sentences [lm.min_sentences, default 10000].
    #[arg(long, value_name = "N")]
    min_sentences: Option<usize>,
}

#[derive(Args)]
struct TrainLidArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    output: OutputFileArgs,
    /// Character n-gram length [lid.gram, default 3].
    #[arg(long, value_name = "N")]
    gram: Option<usize>,
    /// Additive smoothing constant [lid.alpha, default 0.5].
    #[arg(long, value_name = "ALPHA")]
    alpha: Option<f64>,
}

#[derive(Args)]
struct ReportArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    out: OutArgs,
    #[command(flatten)]
    output: OutputFileArgs,
    #[command(flatten)]
    features: FeatureArgs,
}

#[derive(Args)]
struct ShardArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Number of shards [run.shards, default 1].
    #[arg(long, value_name = "N")]
    shards: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    out: OutArgs,
    /// Fluent documents [synth.fluent, default 1000].
    #[arg(long, value_name = "N")]
    fluent: Option<usize>,
    /// Noise documents [synth.noise, default 100].
    #[arg(long, value_name = "N")]
    noise: Option<usize>,
    /// Generator seed [synth.seed, default 1].
    #[arg(long = "synth-seed", value_name = "N")]
    synth_seed: Option<u64>,
}

impl Command {
    fn config_file(&self) -> Option<&PathBuf> {
        match self {
            Command::Clean(a) => a.config.config.as_ref(),
            Command::Scatter(a) => a.clean.config.config.as_ref(),
            Command::Bench(a) => a.clean.config.config.as_ref(),
            Command::ThresholdClean(a) => a.config.config.as_ref(),
            Command::Features(a) => a.config.config.as_ref(),
            Command::TrainLm(a) => a.config.config.as_ref(),
            Command::TrainLid(a) => a.config.config.as_ref(),
            Command::Report(a) => a.config.config.as_ref(),
            Command::Shard(a) => a.config.config.as_ref(),
            Command::Synth(a) => a.config.config.as_ref(),
        }
    }

    fn apply(&self, s: &mut Settings) {
        match self {
            Command::Clean(a) => a.apply(s),
            Command::Scatter(a) => {
                a.clean.apply(s);
                s.set_opt("output.scatter", &a.scatter.as_ref().map(|p| p.display().to_string()));
            }
            Command::Bench(a) => {
                a.clean.apply(s);
                a.rules.apply(s);
            }
            Command::ThresholdClean(a) => {
                a.input.apply(s);
                a.out.apply(s);
                a.run.apply(s);
                a.resources.apply(s);
                a.features.apply(s);
                a.rules.apply(s);
            }
            Command::Features(a) => {
                a.input.apply(s);
                a.output.apply(s);
                a.run.apply(s);
                a.resources.apply(s);
                a.features.apply(s);
            }
            Command::TrainLm(a) => {
                a.input.apply(s);
                a.output.apply(s);
                a.features.apply(s);
                s.set_opt("lm.lang", &a.lang);
                s.set_opt("lm.order", &a.order);
                s.set_opt("lm.min_sentences", &a.min_sentences);
            }
            Command::TrainLid(a) => {
                a.input.apply(s);
                a.output.apply(s);
                s.set_opt("lid.gram", &a.gram);
                s.set_opt("lid.alpha", &a.alpha);
            }
            Command::Report(a) => {
                a.out.apply(s);
                a.output.apply(s);
                a.features.apply(s);
            }
            Command::Shard(a) => {
                a.input.apply(s);
                a.out.apply(s);
                s.set_opt("run.shards", &a.shards);
            }
            Command::Synth(a) => {
                a.out.apply(s);
                s.set_opt("synth.fluent", &a.fluent);
                s.set_opt("synth.noise", &a.noise);
                s.set_opt("synth.seed", &a.synth_seed);
            }
        }
    }
}

fn settings_for(command: Option<&Command>) -> Result<Settings> {
    let mut s = Settings::defaults();
    let file = command
        .and_then(Command::config_file)
        .cloned()
        .or_else(|| std::env::var_os("DCAD_CONFIG").map(PathBuf::from));
    if let Some(f) = file {
        s.merge_file(&f)?;
    }
    s.merge_env(|k| std::env::var(k).ok());
    if let Some(c) = command {
        c.apply(&mut s);
    }
    Ok(s)
}

fn load_resources(p: &ResourcePaths) -> Result<Resources> {
    let mut lexicons = Lexicons::new();
    if let Some(d) = &p.stopwords_dir {
        let n = lexicons.load_stopwords_dir(d)?;
        log::info!("loaded {n} stopword lists from {}", d.display());
    }
    if let Some(d) = &p.flagged_dir {
        let n = lexicons.load_flagged_dir(d)?;
        log::info!("loaded {n} flagged-word lists from {}", d.display());
    }
    if let Some(f) = &p.special_chars {
        lexicons.special_chars = SpecialChars::load(f)?;
    }
    let mut resources = Resources::new(lexicons);
    if let Some(f) = &p.lid_model {
        resources.lid = Some(LidModel::load(f)?);
    }
    if let Some(d) = &p.models_dir {
        let n = resources.load_models_dir(d)?;
        log::info!("loaded {n} language models from {}", d.display());
    }
    Ok(resources)
}

fn summarize(report: &CleanReport) {
    let t = report.total();
    eprintln!(
        "{} documents, {} kept, {} removed ({:.2}%), {} malformed",
        t.docs.total(),
        t.docs.keep,
        t.docs.remove,
        100.0 * report.removal_fraction(),
        report.malformed
    );
    for (lang, r) in &report.languages {
        for f in &r.flags {
            eprintln!("{lang}: {f}");
        }
    }
}

fn exit_for(report: &CleanReport) -> ExitCode {
    if report.has_failures() {
        ExitCode::from(EXIT_PARTIAL)
    } else {
        ExitCode::SUCCESS
    }
}

fn rules_of(r: &settings::Resolved) -> ThresholdRuleSet {
    r.rules.clone().unwrap_or_else(ThresholdRuleSet::loose)
}

fn execute(command: &Command, s: &Settings) -> Result<ExitCode> {
    let r = s.resolve()?;
    if let Some(n) = r.run.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("starting worker threads")?;
    }
    let mut run = r.run.clone();
    run.workers = None;
    match command {
        Command::Clean(_) | Command::Scatter(_) => {
            if matches!(command, Command::Scatter(_)) && run.scatter.is_none() {
                return Err(anyhow!("scatter needs --scatter FILE (output.scatter)"));
            }
            run.out_dir = r.out_dir()?.to_path_buf();
            let inputs = r.input_paths()?;
            let resources = load_resources(&r.resources)?;
            let report = clean_corpus(&inputs, &resources, &r.features, &r.detector, &run)?;
            summarize(&report);
            Ok(exit_for(&report))
        }
        Command::ThresholdClean(_) => {
            run.out_dir = r.out_dir()?.to_path_buf();
            let inputs = r.input_paths()?;
            let resources = load_resources(&r.resources)?;
            let report = threshold_clean(&inputs, &resources, &r.features, &rules_of(&r), &run)?;
            summarize(&report);
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench(_) => {
            run.out_dir = r.out_dir()?.to_path_buf();
            let inputs = r.input_paths()?;
            let resources = load_resources(&r.resources)?;
            let b = benchmark(&inputs, &resources, &r.features, &r.detector, &rules_of(&r), &run)?;
            let tsv = b.to_tsv();
            let path = run.out_dir.join("bench.tsv");
            std::fs::write(&path, &tsv).with_context(|| format!("writing {}", path.display()))?;
            print!("{tsv}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Features(_) => {
            let inputs = r.input_paths()?;
            let resources = load_resources(&r.resources)?;
            let (docs, malformed) =
                export_features(&inputs, &resources, &r.features, run.on_error, run.batch_size, r.output_path()?)?;
            eprintln!("{docs} feature rows, {malformed} malformed lines skipped");
            Ok(ExitCode::SUCCESS)
        }
        Command::TrainLm(_) => {
            let lang = r.lm_lang.clone().ok_or_else(|| anyhow!("train-lm needs --lang (lm.lang)"))?;
            let mut texts = Vec::new();
            for p in r.input_paths()? {
                for rec in read_documents(&p, OnError::Skip)? {
                    let rec = rec?;
                    if rec.doc.lang == lang {
                        texts.push(rec.doc.text);
                    }
                }
            }
            let opts = LmOptions {
                order: r.lm_order,
                lang: lang.clone(),
                mode: Some(r.features.mode(&lang)),
                min_sentences: r.lm_min_sentences,
            };
            let model = train_lm_with(&texts, &opts)?;
            save_arpa(&model, r.output_path()?)?;
            eprintln!("{lang}: {} documents, {} unigrams", texts.len(), model.ngram_count(1));
            Ok(ExitCode::SUCCESS)
        }
        Command::TrainLid(_) => {
            let mut samples: BTreeMap<String, Vec<String>> = BTreeMap::new();
            for p in r.input_paths()? {
                for rec in read_documents(&p, OnError::Skip)? {
                    let rec = rec?;
                    samples.entry(rec.doc.lang).or_default().push(rec.doc.text);
                }
            }
            let model = train_lid(&samples, r.lid_gram, r.lid_alpha)?;
            model.save(r.output_path()?)?;
            eprintln!("{} languages, {} grams", model.languages().len(), model.vocabulary_size());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report(_) => {
            let report = report_from_partitions(r.out_dir()?, &r.features)?;
            match &r.output {
                Some(p) => corpusclean::pipeline::emit_report(&report, p)?,
                None => std::io::stdout().write_all(report.to_tsv().as_bytes())?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Shard(_) => {
            let inputs = r.input_paths()?;
            let m = write_shards(&inputs, r.shards, r.out_dir()?)?;
            eprintln!("{} records in {} shards", m.total(), m.shard_count);
            Ok(ExitCode::SUCCESS)
        }
        Command::Synth(_) => {
            let out = r.out_dir()?;
            write_synth(out, r.synth_fluent, r.synth_noise, r.synth_seed)?;
            eprintln!(
                "{} documents in {}",
                r.synth_fluent + r.synth_noise,
                out.join("corpus.jsonl").display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// `corpus.jsonl`, `labels.tsv` (id and noise kind or "fluent"),
/// `stopwords/` and `flagged/` lists for the synthetic language, and
/// training text: `lm.jsonl` (fluent sentences) and `lid.jsonl` (both
/// synthetic languages, correctly labelled).
fn write_synth(out: &std::path::Path, fluent: usize, noise: usize, seed: u64) -> Result<()> {
    use corpusclean::synth;
    for d in ["stopwords", "flagged"] {
        std::fs::create_dir_all(out.join(d)).with_context(|| format!("creating {}", out.display()))?;
    }
    let docs = synth::mixed_corpus(fluent, noise, seed);
    synth::write_jsonl(&docs, out.join("corpus.jsonl"))?;
    let mut labels = String::from("id\tkind\n");
    for d in &docs {
        let kind = d.noise.map_or("fluent".to_string(), |k| k.to_string());
        labels.push_str(&format!("{}\t{kind}\n", d.doc.id));
    }
    std::fs::write(out.join("labels.tsv"), labels)?;
    for (dir, words) in [("stopwords", synth::stopwords()), ("flagged", synth::flagged_words())] {
        let mut w: Vec<String> = words.into_iter().collect();
        w.sort();
        std::fs::write(out.join(dir).join(format!("{}.txt", synth::FLUENT_LANG)), w.join("\n") + "\n")?;
    }
    let doc = |id: String, lang: &str, text: String| synth::SynthDoc {
        doc: corpusclean::Document::new(id, lang, text),
        noise: None,
    };
    let lm: Vec<_> = synth::lm_sentences(20_000, seed.wrapping_add(1))
        .into_iter()
        .enumerate()
        .map(|(i, t)| doc(format!("lm-{i:05}"), synth::FLUENT_LANG, t))
        .collect();
    synth::write_jsonl(&lm, out.join("lm.jsonl"))?;
    let lid: Vec<_> = synth::lid_samples(300, seed.wrapping_add(2))
        .into_iter()
        .flat_map(|(lang, texts)| {
            texts
                .into_iter()
                .enumerate()
                .map(move |(i, t)| doc(format!("lid-{lang}-{i:03}"), &lang, t))
        })
        .collect();
    synth::write_jsonl(&lid, out.join("lid.jsonl"))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let settings = match settings_for(cli.command.as_ref()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            return ExitCode::from(EXIT_FATAL);
        }
    };
    if cli.version {
        return match settings.resolve() {
            Ok(r) => {
                println!("corpusclean {} config {}", env!("CARGO_PKG_VERSION"), r.hash);
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {}", describe(&e));
                ExitCode::from(EXIT_FATAL)
            }
        };
    }
    let Some(command) = cli.command else {
        let _ = Cli::command().print_help();
        return ExitCode::from(EXIT_USAGE);
    };
    match execute(&command, &settings) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(EXIT_FATAL)
        }
    }
}

/// The error and its causes, leaving out causes already quoted by the
/// message before them.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let text = cause.to_string();
        if out.contains(&text) {
            continue;
        }
        if !out.is_empty() {
            out.push_str(": ");
        }
        out.push_str(&text);
    }
    out
}
