//! End-to-end cleaning: features, per-language standardization, detection,
//! keep/remove output and reporting, plus the rule-based baseline.
//!
//! Output directory layout:
//!
//! ```text
//! keep/<lang>.jsonl     remove/<lang>.jsonl
//! stats/<lang>.json     (stats/global.json with global statistics)
//! malformed.log         report.tsv         timings.tsv
//! ```

mod bench;
mod report;
mod scatter;
mod store;
mod threshold;

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bench::{benchmark, peak_rss_kib, BenchReport, RouteRun};
pub use report::{
    emit_report, report_from_partitions, write_timings, CleanReport, KeepRemove, LanguageReport, ERROR_FLAG_PREFIX,
    FLAG_INSUFFICIENT_DATA, REPORT_COLUMNS,
};
pub use scatter::{export_scatter, ScatterWriter, SCATTER_HEADER};
pub use threshold::{threshold_filter, Bound, ThresholdRuleSet};

use crate::anomaly::{choose_tau, fit_detector, label_scores, DetectorConfig, Label, Matrix};
use crate::corpus_io::{DocumentReader, MalformedLine, OnError, PartitionWriter, Record};
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureConfig, FeatureVector, Resources, FEATURE_COUNT};
use crate::stats::{MomentAccumulator, StandardizationStats};
use store::{FeatureStore, RowReader};

pub const DEFAULT_MIN_DOCS: usize = 32;
pub const DEFAULT_FIT_CAP: usize = 100_000;
/// Bytes of buffered feature rows before the largest language is spilled.
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 30;
pub const DEFAULT_BATCH_SIZE: usize = 4096;

const SCORE_CHUNK: usize = 1 << 16;
const FIT_SAMPLE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatsScope {
    #[default]
    PerLanguage,
    Global,
}

impl FromStr for StatsScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-language" => Ok(StatsScope::PerLanguage),
            "global" => Ok(StatsScope::Global),
            _ => Err(Error::invalid(format!("stats scope must be per-language or global, got {s:?}"))),
        }
    }
}

impl fmt::Display for StatsScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StatsScope::PerLanguage => "per-language",
            StatsScope::Global => "global",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    pub on_error: OnError,
    /// Add `dcad_features`, `dcad_score` and `dcad_label` to output lines.
    pub annotate: bool,
    pub min_docs: usize,
    pub fit_cap: usize,
    pub stats_scope: StatsScope,
    pub memory_budget: usize,
    pub batch_size: usize,
    /// Thread count; `None` uses the global pool.
    pub workers: Option<usize>,
    /// Also write the scatter CSV here.
    pub scatter: Option<PathBuf>,
    pub spill_dir: Option<PathBuf>,
    /// Written into the report header when set.
    pub config_hash: Option<String>,
}

impl RunConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            out_dir: out_dir.into(),
            on_error: OnError::Skip,
            annotate: false,
            min_docs: DEFAULT_MIN_DOCS,
            fit_cap: DEFAULT_FIT_CAP,
            stats_scope: StatsScope::PerLanguage,
            memory_budget: DEFAULT_MEMORY_BUDGET,
            batch_size: DEFAULT_BATCH_SIZE,
            workers: None,
            scatter: None,
            spill_dir: None,
            config_hash: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fit_cap < 2 {
            return Err(Error::invalid("fit cap must be at least 2"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("worker count must be at least 1"));
        }
        Ok(())
    }
}

/// Runs `f` on a pool of `workers` threads, or on the global pool.
pub fn with_workers<R: Send>(workers: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match workers {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::invalid(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

struct MalformedLog {
    out: BufWriter<File>,
    path: PathBuf,
    count: u64,
}

impl MalformedLog {
    fn create(path: PathBuf) -> Result<Self> {
        let f = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(MalformedLog {
            out: BufWriter::new(f),
            path,
            count: 0,
        })
    }

    fn write(&mut self, lines: Vec<MalformedLine>) -> Result<()> {
        for m in lines {
            writeln!(self.out, "{}:{}\t{}", m.path.display(), m.line, m.message).map_err(|e| Error::io(&self.path, e))?;
            self.count += 1;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<u64> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.count)
    }
}

/// Streams every input in order, handing over batches of well-formed
/// records. Malformed lines go to `log` when given; returns their count.
fn for_each_batch(
    inputs: &[PathBuf],
    on_error: OnError,
    batch_size: usize,
    mut log: Option<&mut MalformedLog>,
    mut f: impl FnMut(&[Record]) -> Result<()>,
) -> Result<u64> {
    let mut malformed = 0u64;
    let mut batch = Vec::with_capacity(batch_size);
    for path in inputs {
        let mut reader = DocumentReader::open(path, on_error)?;
        loop {
            let next = reader.next();
            let end = next.is_none();
            if let Some(rec) = next {
                batch.push(rec?);
            }
            let bad = reader.drain_malformed();
            malformed += bad.len() as u64;
            if let Some(l) = log.as_deref_mut() {
                l.write(bad)?;
            }
            if batch.len() >= batch_size || (end && !batch.is_empty()) {
                f(&batch)?;
                batch.clear();
            }
            if end {
                break;
            }
        }
    }
    Ok(malformed)
}

fn features_of(batch: &[Record], resources: &Resources, config: &FeatureConfig) -> Vec<FeatureVector> {
    batch
        .par_iter()
        .map(|r| extract_features(&r.doc, resources, config))
        .collect()
}

fn prepare_out_dir(out: &Path) -> Result<()> {
    for sub in ["keep", "remove", "stats"] {
        let d = out.join(sub);
        if d.is_dir() {
            for e in std::fs::read_dir(&d).map_err(|e| Error::io(&d, e))? {
                let p = e.map_err(|e| Error::io(&d, e))?.path();
                if p.is_file() && p.extension().is_some_and(|x| x == "jsonl" || x == "json") {
                    std::fs::remove_file(&p).map_err(|e| Error::io(&p, e))?;
                }
            }
        }
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    Ok(())
}

fn partition_writer(out: &Path, lang: &str, annotate: bool) -> Result<PartitionWriter> {
    let name = format!("{lang}.jsonl");
    PartitionWriter::create(out.join("keep").join(&name), out.join("remove").join(name), annotate)
}

/// Indices of the rows a detector is fitted on: all of them up to `cap`,
/// otherwise a seeded uniform sample of `cap`, ascending.
pub fn fit_sample(n: usize, cap: usize, seed: u64) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(FIT_SAMPLE_STREAM);
    let mut v = index::sample(&mut rng, n, cap).into_vec();
    v.sort_unstable();
    v
}

fn standardized(x: &Matrix<f64>, stats: &StandardizationStats<f64>) -> Matrix<f64> {
    let mut out = Matrix::with_capacity(x.cols(), x.rows());
    let mut row = vec![0.0; x.cols()];
    for r in x.iter_rows() {
        stats.standardize_into(r, &mut row);
        out.push_row(&row);
    }
    out
}

/// Scores and labels of one language's documents.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageScores {
    pub scores: Vec<f64>,
    pub labels: Vec<Label>,
    pub tau: f64,
    pub fitted_rows: usize,
}

trait RowSource {
    fn rows(&self) -> usize;
    fn dim(&self) -> usize;
    fn select(&mut self, sorted: &[usize]) -> Result<Matrix<f64>>;
    fn chunks(&mut self, size: usize, f: &mut dyn FnMut(usize, &Matrix<f64>)) -> Result<()>;
}

impl RowSource for &Matrix<f64> {
    fn rows(&self) -> usize {
        Matrix::rows(self)
    }

    fn dim(&self) -> usize {
        self.cols()
    }

    fn select(&mut self, sorted: &[usize]) -> Result<Matrix<f64>> {
        Ok(self.select_rows(sorted))
    }

    fn chunks(&mut self, size: usize, f: &mut dyn FnMut(usize, &Matrix<f64>)) -> Result<()> {
        let mut start = 0;
        while start < Matrix::rows(self) {
            let end = (start + size).min(Matrix::rows(self));
            f(start, &self.select_rows(&(start..end).collect::<Vec<_>>()));
            start = end;
        }
        Ok(())
    }
}

impl RowSource for FeatureStore {
    fn rows(&self) -> usize {
        FeatureStore::rows(self)
    }

    fn dim(&self) -> usize {
        FeatureStore::dim(self)
    }

    fn select(&mut self, sorted: &[usize]) -> Result<Matrix<f64>> {
        FeatureStore::select(self, sorted)
    }

    fn chunks(&mut self, size: usize, f: &mut dyn FnMut(usize, &Matrix<f64>)) -> Result<()> {
        let dim = FeatureStore::dim(self);
        let mut reader = self.reader()?;
        let mut start = 0;
        loop {
            let m = reader.next_chunk(dim, size)?;
            if m.rows() == 0 {
                return Ok(());
            }
            f(start, &m);
            start += m.rows();
        }
    }
}

fn score_source(
    src: &mut dyn RowSource,
    stats: &StandardizationStats<f64>,
    detector: &DetectorConfig,
    fit_cap: usize,
) -> Result<LanguageScores> {
    let n = src.rows();
    if n == 0 {
        return Err(Error::EmptyInput("no documents to score".into()));
    }
    if stats.dim() != src.dim() {
        return Err(Error::invalid(format!(
            "statistics cover {} features, rows have {}",
            stats.dim(),
            src.dim()
        )));
    }
    detector.validate(src.dim())?;
    let idx = fit_sample(n, fit_cap, detector.seed);
    let model = {
        let fit = standardized(&src.select(&idx)?, stats);
        fit_detector(&fit, detector)?
    };
    let mut scores = Vec::with_capacity(n);
    src.chunks(SCORE_CHUNK, &mut |start, chunk| {
        let z = standardized(chunk, stats);
        let refs: Vec<Option<usize>> = (start..start + chunk.rows()).map(|i| idx.binary_search(&i).ok()).collect();
        scores.extend(model.score_rows(&z, Some(&refs)));
    })?;
    let labels = label_scores(&scores, detector);
    let tau = choose_tau(&scores, detector.contamination, detector.tau)?;
    Ok(LanguageScores {
        scores,
        labels,
        tau,
        fitted_rows: idx.len(),
    })
}

/// Standardizes the raw feature rows of one language with `stats`, fits the
/// detector on at most `fit_cap` of them, scores every row and labels by the
/// configured threshold rule. This is the per-language step of
/// [`clean_corpus`].
pub fn score_language(
    x: &Matrix<f64>,
    stats: &StandardizationStats<f64>,
    detector: &DetectorConfig,
    fit_cap: usize,
) -> Result<LanguageScores> {
    let mut src = x;
    score_source(&mut src, stats, detector, fit_cap)
}

struct LangState {
    store: FeatureStore,
    acc: MomentAccumulator<f64>,
    failure: Option<String>,
}

impl LangState {
    fn new() -> Self {
        LangState {
            store: FeatureStore::new(FEATURE_COUNT),
            acc: MomentAccumulator::new(FEATURE_COUNT),
            failure: None,
        }
    }
}

enum Outcome {
    Scored(LanguageScores),
    Unfiltered,
    Failed(String),
}

impl Outcome {
    fn verdict(&self, i: usize) -> (f64, Label) {
        match self {
            Outcome::Scored(s) => (s.scores[i], s.labels[i]),
            _ => (f64::NAN, Label::Keep),
        }
    }
}

fn enforce_budget(langs: &mut BTreeMap<String, LangState>, budget: usize, spill_dir: Option<&Path>) -> Result<()> {
    loop {
        let used: usize = langs.values().map(|s| s.store.memory_bytes()).sum();
        if used <= budget {
            return Ok(());
        }
        let largest = langs
            .values_mut()
            .filter(|s| !s.store.is_spilled())
            .max_by_key(|s| s.store.memory_bytes());
        match largest {
            Some(s) => {
                log::info!("feature buffer over {budget} bytes; spilling {} rows", s.store.rows());
                s.store.spill(spill_dir)?;
            }
            None => return Ok(()),
        }
    }
}

/// The full anomaly-detection clean of `inputs` into `run.out_dir`.
///
/// Pass 1 extracts features and accumulates moments per language. Each
/// language with at least `run.min_docs` documents is then standardized,
/// fitted, scored and labelled; smaller ones pass through unfiltered. Pass 2
/// re-reads the inputs and routes every record to its keep or remove file
/// in input order. A language whose detection fails is passed through and
/// flagged; the run continues.
pub fn clean_corpus(
    inputs: &[PathBuf],
    resources: &Resources,
    features: &FeatureConfig,
    detector: &DetectorConfig,
    run: &RunConfig,
) -> Result<CleanReport> {
    run.validate()?;
    features.validate()?;
    detector.validate(FEATURE_COUNT)?;
    with_workers(run.workers, || clean_inner(inputs, resources, features, detector, run))?
}

fn clean_inner(
    inputs: &[PathBuf],
    resources: &Resources,
    features: &FeatureConfig,
    detector: &DetectorConfig,
    run: &RunConfig,
) -> Result<CleanReport> {
    let out = &run.out_dir;
    prepare_out_dir(out)?;
    let mut report = CleanReport {
        config_hash: run.config_hash.clone(),
        ..Default::default()
    };

    let t = Instant::now();
    let mut langs: BTreeMap<String, LangState> = BTreeMap::new();
    let mut mlog = MalformedLog::create(out.join("malformed.log"))?;
    for_each_batch(inputs, run.on_error, run.batch_size, Some(&mut mlog), |batch| {
        let fvs = features_of(batch, resources, features);
        for (rec, fv) in batch.iter().zip(&fvs) {
            let st = langs.entry(rec.doc.lang.clone()).or_insert_with(LangState::new);
            let row = fv.to_array();
            if st.failure.is_none() {
                if let Err(e) = st.acc.accumulate(&row) {
                    st.failure = Some(format!("record {}: {e}", rec.doc.id));
                }
            }
            st.store.push(&row)?;
        }
        enforce_budget(&mut langs, run.memory_budget, run.spill_dir.as_deref())
    })?;
    report.malformed = mlog.finish()?;
    report.timings.push(("features".into(), t.elapsed().as_secs_f64()));

    let t = Instant::now();
    let global = match run.stats_scope {
        StatsScope::PerLanguage => None,
        StatsScope::Global => {
            let mut acc = MomentAccumulator::new(FEATURE_COUNT);
            for s in langs.values().filter(|s| s.failure.is_none()) {
                acc.merge(&s.acc);
            }
            if acc.count() == 0 {
                None
            } else {
                let g = acc.finalize()?;
                g.save(out.join("stats").join("global.json"))?;
                Some(g)
            }
        }
    };
    let outcomes: BTreeMap<String, Outcome> = langs
        .par_iter_mut()
        .map(|(lang, st)| {
            let outcome = if let Some(f) = &st.failure {
                Outcome::Failed(f.clone())
            } else if st.store.rows() < run.min_docs {
                Outcome::Unfiltered
            } else {
                let result = st.acc.finalize().and_then(|own| {
                    own.save(out.join("stats").join(format!("{lang}.json")))?;
                    let stats = global.as_ref().unwrap_or(&own);
                    score_source(&mut st.store, stats, detector, run.fit_cap)
                });
                match result {
                    Ok(s) => Outcome::Scored(s),
                    Err(e) => Outcome::Failed(e.to_string()),
                }
            };
            (lang.clone(), outcome)
        })
        .collect();
    for (lang, o) in &outcomes {
        match o {
            Outcome::Unfiltered => report.flag(lang, FLAG_INSUFFICIENT_DATA),
            Outcome::Failed(msg) => {
                log::error!("language {lang} passed through unfiltered: {msg}");
                report.flag(lang, format!("{ERROR_FLAG_PREFIX}{msg}"));
            }
            Outcome::Scored(_) => {}
        }
    }
    report.timings.push(("detect".into(), t.elapsed().as_secs_f64()));

    let t = Instant::now();
    struct Route<'a> {
        writer: PartitionWriter,
        rows: RowReader<'a>,
        outcome: &'a Outcome,
        next: usize,
    }
    let mut routes: BTreeMap<&str, Route<'_>> = BTreeMap::new();
    for (lang, st) in langs.iter_mut() {
        routes.insert(
            lang.as_str(),
            Route {
                writer: partition_writer(out, lang, run.annotate)?,
                rows: st.store.reader()?,
                outcome: &outcomes[lang],
                next: 0,
            },
        );
    }
    let mut scatter = run.scatter.as_ref().map(ScatterWriter::create).transpose()?;
    let mut row = [0.0; FEATURE_COUNT];
    for path in inputs {
        let mut reader = DocumentReader::open(path, OnError::Skip)?;
        while let Some(rec) = reader.next() {
            let rec = rec?;
            reader.drain_malformed();
            let route = routes
                .get_mut(rec.doc.lang.as_str())
                .ok_or_else(|| Error::invalid(format!("{}: input changed between passes", path.display())))?;
            if !route.rows.next_into(&mut row)? {
                return Err(Error::invalid(format!("{}: input changed between passes", path.display())));
            }
            let fv = FeatureVector::from_array(row);
            let (score, label) = route.outcome.verdict(route.next);
            route.next += 1;
            route.writer.write(&rec.raw, label, &fv, score)?;
            report
                .languages
                .entry(rec.doc.lang.clone())
                .or_default()
                .record(label, fv.n_words as u64, rec.raw.len() as u64 + 1);
            if let Some(s) = scatter.as_mut() {
                s.write_row(&fv, score, label)?;
            }
        }
    }
    for (_, r) in routes {
        r.writer.finish()?;
    }
    if let Some(s) = scatter {
        s.finish()?;
    }
    report.timings.push(("partition".into(), t.elapsed().as_secs_f64()));

    emit_report(&report, out.join("report.tsv"))?;
    write_timings(&report, out.join("timings.tsv"))?;
    Ok(report)
}

/// The baseline: one pass of feature extraction and fixed-bound labelling
/// with the same output layout as [`clean_corpus`].
pub fn threshold_clean(
    inputs: &[PathBuf],
    resources: &Resources,
    features: &FeatureConfig,
    rules: &ThresholdRuleSet,
    run: &RunConfig,
) -> Result<CleanReport> {
    run.validate()?;
    features.validate()?;
    with_workers(run.workers, || {
        let out = &run.out_dir;
        prepare_out_dir(out)?;
        let mut report = CleanReport {
            config_hash: run.config_hash.clone(),
            ..Default::default()
        };
        let t = Instant::now();
        let mut writers: BTreeMap<String, PartitionWriter> = BTreeMap::new();
        let mut scatter = run.scatter.as_ref().map(ScatterWriter::create).transpose()?;
        let mut mlog = MalformedLog::create(out.join("malformed.log"))?;
        for_each_batch(inputs, run.on_error, run.batch_size, Some(&mut mlog), |batch| {
            let fvs = features_of(batch, resources, features);
            for (rec, fv) in batch.iter().zip(&fvs) {
                let label = rules.label(fv);
                let w = match writers.get_mut(&rec.doc.lang) {
                    Some(w) => w,
                    None => writers
                        .entry(rec.doc.lang.clone())
                        .or_insert(partition_writer(out, &rec.doc.lang, run.annotate)?),
                };
                w.write(&rec.raw, label, fv, f64::NAN)?;
                report
                    .languages
                    .entry(rec.doc.lang.clone())
                    .or_default()
                    .record(label, fv.n_words as u64, rec.raw.len() as u64 + 1);
                if let Some(s) = scatter.as_mut() {
                    s.write_row(fv, f64::NAN, label)?;
                }
            }
            Ok(())
        })?;
        report.malformed = mlog.finish()?;
        for (_, w) in writers {
            w.finish()?;
        }
        if let Some(s) = scatter {
            s.finish()?;
        }
        report.timings.push(("features+threshold".into(), t.elapsed().as_secs_f64()));
        emit_report(&report, out.join("report.tsv"))?;
        write_timings(&report, out.join("timings.tsv"))?;
        Ok(report)
    })?
}

/// One line of a feature export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub id: String,
    pub lang: String,
    pub features: [f64; FEATURE_COUNT],
}

/// Writes one JSON feature row per well-formed document, in input order.
/// Returns `(documents, malformed)`.
pub fn export_features(
    inputs: &[PathBuf],
    resources: &Resources,
    features: &FeatureConfig,
    on_error: OnError,
    batch_size: usize,
    path: impl AsRef<Path>,
) -> Result<(u64, u64)> {
    let path = path.as_ref();
    let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
    let mut docs = 0u64;
    let malformed = for_each_batch(inputs, on_error, batch_size.max(1), None, |batch| {
        for (rec, fv) in batch.iter().zip(features_of(batch, resources, features)) {
            let row = FeatureRow {
                id: rec.doc.id.clone(),
                lang: rec.doc.lang.clone(),
                features: fv.to_array(),
            };
            let line = serde_json::to_string(&row).map_err(|e| Error::invalid(e.to_string()))?;
            writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
            docs += 1;
        }
        Ok(())
    })?;
    out.flush().map_err(|e| Error::io(path, e))?;
    Ok((docs, malformed))
}

pub fn read_feature_rows(path: impl AsRef<Path>) -> Result<Vec<FeatureRow>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}
