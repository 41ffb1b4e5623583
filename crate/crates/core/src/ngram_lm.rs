//! Word n-gram language model with stupid backoff, ARPA persistence and
//! perplexity scoring.
//!
//! Training stores maximum-likelihood log10 probabilities for every seen
//! k-gram, `log10(0.4)` as the backoff weight of every lower-order gram, and
//! gives `<unk>` the mass of one extra unigram count. Scoring follows the
//! usual ARPA back-off recursion, so a model loaded from a file written by
//! another tool is scored the standard way.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::corpus_io::UNDETERMINED_LANG;
use crate::error::{Error, Result};
use crate::features::{mode_for, tokenize_with, TokenizerMode};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";

pub const DEFAULT_ORDER: usize = 3;
/// Perplexity assigned when no model exists for a language or a text has no
/// scored positions.
pub const DEFAULT_PERPLEXITY: f64 = 500.0;
pub const BACKOFF_WEIGHT: f64 = 0.4;
/// Below this many training sentences the trainer logs a warning.
pub const DEFAULT_MIN_SENTENCES: usize = 10_000;

/// Log10 probability written for `<s>`, which is never predicted.
const BOS_LOG_PROB: f64 = -99.0;
/// Score for an out-of-vocabulary token when the model has no `<unk>` entry.
const UNK_FLOOR: f64 = -99.0;

pub fn default_perplexity() -> f64 {
    DEFAULT_PERPLEXITY
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NgramEntry {
    pub log10_prob: f64,
    pub backoff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LanguageModel {
    order: usize,
    lang: String,
    vocab: HashMap<String, u32>,
    words: Vec<String>,
    /// `tables[k - 1]` holds the k-grams.
    tables: Vec<HashMap<Box<[u32]>, NgramEntry>>,
}

#[derive(Debug, Clone)]
pub struct LmOptions {
    pub order: usize,
    pub lang: String,
    /// Tokenizer; defaults to the one chosen by the language's script.
    pub mode: Option<TokenizerMode>,
    pub min_sentences: usize,
}

impl LmOptions {
    pub fn new(order: usize, lang: impl Into<String>) -> Self {
        LmOptions {
            order,
            lang: lang.into(),
            mode: None,
            min_sentences: DEFAULT_MIN_SENTENCES,
        }
    }
}

/// Trains a model on `corpus`; each line of each text is one sentence.
pub fn train_lm<I, S>(corpus: I, order: usize, lang: &str) -> Result<LanguageModel>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    train_lm_with(corpus, &LmOptions::new(order, lang))
}

pub fn train_lm_with<I, S>(corpus: I, opts: &LmOptions) -> Result<LanguageModel>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    if opts.order == 0 {
        return Err(Error::invalid("language model order must be at least 1"));
    }
    let order = opts.order;
    let mode = opts.mode.unwrap_or_else(|| mode_for(&opts.lang));
    let mut model = LanguageModel::empty(order, &opts.lang);
    let bos = model.intern(BOS);
    let eos = model.intern(EOS);
    let unk = model.intern(UNK);

    let mut counts: Vec<HashMap<Box<[u32]>, u64>> = vec![HashMap::new(); order];
    let mut sentences = 0usize;
    let mut padded = Vec::new();
    for text in corpus {
        for line in text.as_ref().lines() {
            let tokens = tokenize_with(line, mode);
            if tokens.is_empty() {
                continue;
            }
            sentences += 1;
            padded.clear();
            padded.push(bos);
            for t in &tokens {
                let id = model.intern(t);
                padded.push(id);
            }
            padded.push(eos);
            // Every window ending at a predicted position (never at <s>).
            for end in 1..padded.len() {
                for k in 1..=order.min(end + 1) {
                    let gram = &padded[end + 1 - k..=end];
                    *counts[k - 1].entry(gram.into()).or_insert(0) += 1;
                }
            }
        }
    }
    if sentences == 0 {
        return Err(Error::EmptyInput("language model corpus has no tokens".into()));
    }
    if sentences < opts.min_sentences {
        log::warn!(
            "training {} language model on {sentences} sentences (fewer than {})",
            opts.lang,
            opts.min_sentences
        );
    }

    let lower_backoff = |k: usize| (k < order).then(|| BACKOFF_WEIGHT.log10());
    let total: u64 = counts[0].values().sum();
    let denom = (total + 1) as f64;
    let uni = &mut model.tables[0];
    for (gram, &c) in &counts[0] {
        uni.insert(
            gram.clone(),
            NgramEntry {
                log10_prob: (c as f64 / denom).log10(),
                backoff: lower_backoff(1),
            },
        );
    }
    uni.insert(
        Box::new([unk]),
        NgramEntry {
            log10_prob: (1.0 / denom).log10(),
            backoff: lower_backoff(1),
        },
    );
    uni.insert(
        Box::new([bos]),
        NgramEntry {
            log10_prob: BOS_LOG_PROB,
            backoff: lower_backoff(1),
        },
    );
    for k in 2..=order {
        let mut context_totals: HashMap<&[u32], u64> = HashMap::new();
        for (gram, &c) in &counts[k - 1] {
            *context_totals.entry(&gram[..k - 1]).or_insert(0) += c;
        }
        let table = &mut model.tables[k - 1];
        for (gram, &c) in &counts[k - 1] {
            let ctx = context_totals[&gram[..k - 1]];
            table.insert(
                gram.clone(),
                NgramEntry {
                    log10_prob: (c as f64 / ctx as f64).log10(),
                    backoff: lower_backoff(k),
                },
            );
        }
    }
    Ok(model)
}

impl LanguageModel {
    fn empty(order: usize, lang: &str) -> Self {
        LanguageModel {
            order,
            lang: lang.to_string(),
            vocab: HashMap::new(),
            words: Vec::new(),
            tables: vec![HashMap::new(); order],
        }
    }

    fn intern(&mut self, w: &str) -> u32 {
        if let Some(&id) = self.vocab.get(w) {
            return id;
        }
        let id = self.words.len() as u32;
        self.words.push(w.to_string());
        self.vocab.insert(w.to_string(), id);
        id
    }

    pub fn with_lang(mut self, lang: impl Into<String>) -> Self {
        self.lang = lang.into();
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn lang(&self) -> &str {
        &self.lang
    }

    pub fn ngram_count(&self, k: usize) -> usize {
        self.tables.get(k.wrapping_sub(1)).map_or(0, HashMap::len)
    }

    /// Looks up a stored n-gram by its tokens.
    pub fn entry(&self, gram: &[&str]) -> Option<NgramEntry> {
        let ids: Option<Vec<u32>> = gram.iter().map(|w| self.vocab.get(*w).copied()).collect();
        let ids = ids?;
        self.tables.get(ids.len().checked_sub(1)?)?.get(ids.as_slice()).copied()
    }

    /// Stored unigrams and their probabilities.
    pub fn unigrams(&self) -> impl Iterator<Item = (&str, f64)> {
        self.tables[0]
            .iter()
            .map(|(g, e)| (self.words[g[0] as usize].as_str(), e.log10_prob))
    }

    fn unk_score(&self) -> f64 {
        self.vocab
            .get(UNK)
            .and_then(|&id| self.tables[0].get(&[id][..]))
            .map_or(UNK_FLOOR, |e| e.log10_prob)
    }

    /// log10 p(word | history) with back-off. `None` ids are out of
    /// vocabulary.
    fn score_ids(&self, history: &[Option<u32>], word: Option<u32>) -> f64 {
        let Some(word) = word else {
            return self.backoff_sum(history) + self.unk_score();
        };
        let mut acc = 0.0;
        let mut hist = history;
        let mut key: Vec<u32> = Vec::with_capacity(self.order);
        loop {
            if hist.is_empty() {
                return acc
                    + self.tables[0]
                        .get(&[word][..])
                        .map_or_else(|| self.unk_score(), |e| e.log10_prob);
            }
            if let Some(h) = hist.iter().copied().collect::<Option<Vec<u32>>>() {
                key.clear();
                key.extend_from_slice(&h);
                key.push(word);
                if let Some(e) = self.tables[key.len() - 1].get(key.as_slice()) {
                    return acc + e.log10_prob;
                }
                acc += self.tables[h.len() - 1]
                    .get(h.as_slice())
                    .and_then(|e| e.backoff)
                    .unwrap_or(0.0);
            }
            hist = &hist[1..];
        }
    }

    /// Sum of the back-off weights met while shortening `history` to empty,
    /// used when the predicted word is unknown to every order.
    fn backoff_sum(&self, history: &[Option<u32>]) -> f64 {
        (0..history.len())
            .filter_map(|s| {
                let h: Option<Vec<u32>> = history[s..].iter().copied().collect();
                let h = h?;
                self.tables[h.len() - 1].get(h.as_slice()).and_then(|e| e.backoff)
            })
            .sum()
    }

    /// log10 p(word | history) for string tokens. Histories longer than
    /// `order - 1` are truncated from the left.
    pub fn log10_prob(&self, history: &[&str], word: &str) -> f64 {
        let keep = history.len().min(self.order - 1);
        let h: Vec<Option<u32>> = history[history.len() - keep..]
            .iter()
            .map(|w| self.vocab.get(*w).copied())
            .collect();
        self.score_ids(&h, self.vocab.get(word).copied())
    }

    /// Total log10 probability and number of scored positions of one
    /// tokenized sentence (its tokens plus `</s>`).
    pub fn sentence_log10<S: AsRef<str>>(&self, tokens: &[S]) -> (f64, usize) {
        let mut ids: Vec<Option<u32>> = Vec::with_capacity(tokens.len() + 2);
        ids.push(self.vocab.get(BOS).copied());
        ids.extend(tokens.iter().map(|t| self.vocab.get(t.as_ref()).copied()));
        ids.push(self.vocab.get(EOS).copied());
        let mut total = 0.0;
        for i in 1..ids.len() {
            let start = i.saturating_sub(self.order - 1);
            total += self.score_ids(&ids[start..i], ids[i]);
        }
        (total, ids.len() - 1)
    }

    /// Perplexity over pre-tokenized sentences.
    pub fn perplexity_sentences<S: AsRef<str>>(&self, sentences: &[Vec<S>]) -> Result<f64> {
        let mut log_sum = 0.0;
        let mut positions = 0usize;
        for s in sentences.iter().filter(|s| !s.is_empty()) {
            let (lp, n) = self.sentence_log10(s);
            log_sum += lp;
            positions += n;
        }
        if positions == 0 {
            return Err(Error::NoScoredPositions);
        }
        Ok(10f64.powf(-log_sum / positions as f64))
    }

    /// Perplexity of `text`, one sentence per line, tokenized with the
    /// model language's default tokenizer.
    pub fn perplexity(&self, text: &str) -> Result<f64> {
        let mode = mode_for(&self.lang);
        let sentences: Vec<Vec<String>> = text.lines().map(|l| tokenize_with(l, mode)).collect();
        self.perplexity_sentences(&sentences)
    }

    /// Serializes to ARPA text. Grams are sorted so output is stable.
    pub fn to_arpa(&self) -> String {
        let mut out = String::from("\\data\\\n");
        for (k, t) in self.tables.iter().enumerate() {
            let _ = writeln!(out, "ngram {}={}", k + 1, t.len());
        }
        for (k, table) in self.tables.iter().enumerate() {
            let _ = write!(out, "\n\\{}-grams:\n", k + 1);
            let mut rows: Vec<(Vec<&str>, &NgramEntry)> = table
                .iter()
                .map(|(g, e)| (g.iter().map(|&id| self.words[id as usize].as_str()).collect(), e))
                .collect();
            rows.sort_by(|a, b| a.0.cmp(&b.0));
            for (gram, e) in rows {
                let _ = write!(out, "{}\t{}", e.log10_prob, gram.join(" "));
                if let Some(b) = e.backoff {
                    let _ = write!(out, "\t{b}");
                }
                out.push('\n');
            }
        }
        out.push_str("\n\\end\\\n");
        out
    }

    pub fn from_arpa(text: &str, path: &Path) -> Result<Self> {
        parse_arpa(text, path)
    }
}

pub fn save_arpa(model: &LanguageModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, model.to_arpa()).map_err(|e| Error::io(path, e))
}

/// Loads an ARPA file; the language defaults to the file stem when it looks
/// like a language code.
pub fn load_arpa(path: impl AsRef<Path>) -> Result<LanguageModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let model = parse_arpa(&text, path)?;
    let lang = path
        .file_stem()
        .and_then(|s| s.to_str())
        .filter(|s| crate::corpus_io::is_valid_lang(s))
        .unwrap_or(UNDETERMINED_LANG);
    Ok(model.with_lang(lang))
}

fn parse_arpa(text: &str, path: &Path) -> Result<LanguageModel> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    let mut last_line = 0;

    // Skip anything before \data\.
    loop {
        match lines.next() {
            Some((_, "\\data\\")) => break,
            Some((n, _)) => last_line = n,
            None => return Err(err(last_line + 1, "missing \\data\\ section".into())),
        }
    }
    let mut declared: Vec<usize> = Vec::new();
    let mut pending = None;
    for (n, line) in lines.by_ref() {
        last_line = n;
        if line.trim().is_empty() {
            if !declared.is_empty() {
                break;
            }
            continue;
        }
        if line.starts_with('\\') {
            pending = Some((n, line));
            break;
        }
        let rest = line
            .strip_prefix("ngram ")
            .ok_or_else(|| err(n, format!("expected \"ngram k=count\", got {line:?}")))?;
        let (k, c) = rest
            .split_once('=')
            .ok_or_else(|| err(n, "expected \"ngram k=count\"".into()))?;
        let k: usize = k.trim().parse().map_err(|_| err(n, format!("bad order {k:?}")))?;
        let c: usize = c.trim().parse().map_err(|_| err(n, format!("bad count {c:?}")))?;
        if k != declared.len() + 1 {
            return Err(err(n, format!("expected ngram {} declaration", declared.len() + 1)));
        }
        declared.push(c);
    }
    if declared.is_empty() {
        return Err(err(last_line, "no ngram counts in \\data\\ section".into()));
    }
    let order = declared.len();
    let mut model = LanguageModel::empty(order, UNDETERMINED_LANG);
    let mut section: Option<usize> = None;
    let mut ended = false;
    let mut rows = pending.into_iter().chain(lines);
    while let Some((n, line)) = rows.next() {
        last_line = n;
        if line.trim().is_empty() {
            continue;
        }
        if line == "\\end\\" {
            ended = true;
            break;
        }
        if let Some(header) = line.strip_prefix('\\') {
            let k: usize = header
                .strip_suffix("-grams:")
                .and_then(|k| k.parse().ok())
                .ok_or_else(|| err(n, format!("unexpected section header {line:?}")))?;
            let expected = section.map_or(1, |s| s + 1);
            if k != expected || k > order {
                return Err(err(n, format!("expected \\{expected}-grams: section")));
            }
            if let Some(s) = section {
                check_count(&model, s, declared[s - 1]).map_err(|m| err(n, m))?;
            }
            section = Some(k);
            continue;
        }
        let k = section.ok_or_else(|| err(n, "n-gram entry outside a section".into()))?;
        let mut fields = line.split('\t');
        let prob: f64 = fields
            .next()
            .and_then(|p| p.trim().parse().ok())
            .ok_or_else(|| err(n, "bad log10 probability".into()))?;
        let gram_text = fields.next().ok_or_else(|| err(n, "missing n-gram".into()))?;
        let backoff = match fields.next() {
            Some(b) => Some(b.trim().parse::<f64>().map_err(|_| err(n, format!("bad backoff {b:?}")))?),
            None => None,
        };
        if fields.next().is_some() {
            return Err(err(n, "too many fields".into()));
        }
        let words: Vec<&str> = gram_text.split(' ').collect();
        if words.len() != k || words.iter().any(|w| w.is_empty()) {
            return Err(err(n, format!("expected a {k}-gram, got {gram_text:?}")));
        }
        let ids: Vec<u32> = words.iter().map(|w| model.intern(w)).collect();
        if k > 1 && !model.tables[k - 2].contains_key(&ids[..k - 1]) {
            return Err(err(n, format!("prefix of {gram_text:?} is not a stored {}-gram", k - 1)));
        }
        let entry = NgramEntry {
            log10_prob: prob,
            backoff,
        };
        if model.tables[k - 1].insert(ids.into_boxed_slice(), entry).is_some() {
            return Err(err(n, format!("duplicate n-gram {gram_text:?}")));
        }
    }
    if !ended {
        return Err(err(last_line + 1, "missing \\end\\ marker".into()));
    }
    match section {
        Some(s) if s == order => check_count(&model, s, declared[s - 1]).map_err(|m| err(last_line, m))?,
        _ => return Err(err(last_line, format!("expected {order} n-gram sections"))),
    }
    Ok(model)
}

fn check_count(model: &LanguageModel, k: usize, declared: usize) -> std::result::Result<(), String> {
    let found = model.tables[k - 1].len();
    if found != declared {
        return Err(format!("\\data\\ declares {declared} {k}-grams but {found} were listed"));
    }
    Ok(())
}
