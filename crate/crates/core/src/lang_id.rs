//! Character n-gram language identification.
//!
//! Each language gets an add-alpha smoothed distribution over the character
//! n-grams seen in training plus one bucket for unseen grams. A text is
//! scored per language by its log prior plus summed gram log-probabilities,
//! divided by the gram count; the confidence is the softmax share of those
//! length-normalized scores.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_GRAM: usize = 3;
pub const DEFAULT_ALPHA: f64 = 0.5;

const FORMAT_TAG: &str = "lidmodel";
const FORMAT_VERSION: u32 = 1;

/// Lowercases and collapses whitespace runs to one space, trimming the ends.
fn normalize(text: &str) -> Vec<char> {
    let mut out = Vec::with_capacity(text.len());
    let mut pending_space = false;
    for c in text.chars() {
        if c.is_whitespace() {
            pending_space = !out.is_empty();
            continue;
        }
        if pending_space {
            out.push(' ');
            pending_space = false;
        }
        out.extend(c.to_lowercase());
    }
    out
}

/// Normalized text padded with one space on each side when `n > 1`.
fn padded(text: &str, n: usize) -> Vec<char> {
    let body = normalize(text);
    if body.is_empty() {
        return body;
    }
    if n == 1 {
        return body;
    }
    let mut v = Vec::with_capacity(body.len() + 2);
    v.push(' ');
    v.extend(body);
    v.push(' ');
    v
}

/// The character n-grams of `text` as the model sees them.
pub fn char_grams(text: &str, n: usize) -> Vec<String> {
    padded(text, n).windows(n).map(|w| w.iter().collect()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LidModel {
    n: usize,
    alpha: f64,
    languages: Vec<String>,
    totals: Vec<u64>,
    log_prior: Vec<f64>,
    unk_log_prob: Vec<f64>,
    table: HashMap<String, Vec<f64>>,
}

/// Trains a model from per-language sample texts.
pub fn train_lid(samples: &BTreeMap<String, Vec<String>>, n: usize, alpha: f64) -> Result<LidModel> {
    if samples.len() < 2 {
        return Err(Error::invalid("language identification needs at least two languages"));
    }
    if n == 0 {
        return Err(Error::invalid("gram length must be at least 1"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("smoothing alpha must be positive, got {alpha}")));
    }
    let languages: Vec<String> = samples.keys().cloned().collect();
    let l = languages.len();
    let mut counts: HashMap<String, Vec<u64>> = HashMap::new();
    let mut totals = vec![0u64; l];
    for (li, texts) in samples.values().enumerate() {
        for text in texts {
            for w in padded(text, n).windows(n) {
                let gram: String = w.iter().collect();
                counts.entry(gram).or_insert_with(|| vec![0; l])[li] += 1;
                totals[li] += 1;
            }
        }
    }
    if let Some(li) = totals.iter().position(|&t| t == 0) {
        return Err(Error::EmptyInput(format!(
            "language {} has no character {n}-grams",
            languages[li]
        )));
    }
    let vocab = counts.len() as f64;
    let grand: u64 = totals.iter().sum();
    let denom: Vec<f64> = totals.iter().map(|&t| t as f64 + alpha * (vocab + 1.0)).collect();
    let log_prior = totals.iter().map(|&t| (t as f64 / grand as f64).ln()).collect();
    let unk_log_prob = denom.iter().map(|d| (alpha / d).ln()).collect();
    let table = counts
        .into_iter()
        .map(|(g, c)| {
            let lp = c
                .iter()
                .zip(&denom)
                .map(|(&c, d)| ((c as f64 + alpha) / d).ln())
                .collect();
            (g, lp)
        })
        .collect();
    Ok(LidModel {
        n,
        alpha,
        languages,
        totals,
        log_prior,
        unk_log_prob,
        table,
    })
}

impl LidModel {
    pub fn gram_length(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Languages in lexicographic order.
    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn vocabulary_size(&self) -> usize {
        self.table.len()
    }

    /// Natural-log probability of `gram` under language `index`; unseen grams
    /// fall into the unknown bucket.
    pub fn log_prob(&self, index: usize, gram: &str) -> f64 {
        self.table
            .get(gram)
            .map_or(self.unk_log_prob[index], |lp| lp[index])
    }

    pub fn unknown_log_prob(&self, index: usize) -> f64 {
        self.unk_log_prob[index]
    }

    /// All known grams with their per-language log-probabilities.
    pub fn grams(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.table.iter().map(|(g, lp)| (g.as_str(), lp.as_slice()))
    }

    /// Length-normalized scores per language, or `None` for a text without
    /// grams.
    pub fn scores(&self, text: &str) -> Option<Vec<f64>> {
        let chars = padded(text, self.n);
        if chars.len() < self.n {
            return None;
        }
        let mut sums = self.log_prior.clone();
        let mut buf = String::new();
        let mut grams = 0usize;
        for w in chars.windows(self.n) {
            buf.clear();
            buf.extend(w);
            match self.table.get(buf.as_str()) {
                Some(lp) => sums.iter_mut().zip(lp).for_each(|(s, p)| *s += p),
                None => sums.iter_mut().zip(&self.unk_log_prob).for_each(|(s, p)| *s += p),
            }
            grams += 1;
        }
        Some(sums.into_iter().map(|s| s / grams as f64).collect())
    }

    /// Softmax shares of the per-language scores; uniform for empty text.
    pub fn probabilities(&self, text: &str) -> Vec<f64> {
        let l = self.languages.len();
        match self.scores(text) {
            None => vec![1.0 / l as f64; l],
            Some(s) => softmax(&s),
        }
    }

    /// Most likely language and its confidence. Ties go to the
    /// lexicographically first language; empty text yields `("und", 1/L)`.
    pub fn identify(&self, text: &str) -> (String, f64) {
        let l = self.languages.len();
        let Some(scores) = self.scores(text) else {
            return ("und".to_string(), 1.0 / l as f64);
        };
        let probs = softmax(&scores);
        let mut best = 0;
        for i in 1..l {
            if scores[i] > scores[best] {
                best = i;
            }
        }
        (self.languages[best].clone(), probs[best])
    }

    /// Confidence that `text` is in `lang`. Falls back to the argmax
    /// confidence when `lang` is not in the inventory.
    pub fn confidence_for(&self, text: &str, lang: &str) -> f64 {
        match self.languages.binary_search_by(|l| l.as_str().cmp(lang)) {
            Ok(i) => self.probabilities(text)[i],
            Err(_) => self.identify(text).1,
        }
    }

    /// Writes the plain-text table format:
    ///
    /// ```text
    /// lidmodel<TAB>1
    /// n<TAB>3
    /// alpha<TAB>0.5
    /// languages<TAB>eng_Latn<TAB>rus_Cyrl
    /// totals<TAB>...
    /// prior<TAB>...        natural-log priors
    /// unknown<TAB>...      natural-log unknown-gram probabilities
    /// grams<TAB>V
    /// <gram><TAB><lp per language>...    V lines, sorted by gram
    /// ```
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let join = |v: &mut dyn Iterator<Item = String>| v.collect::<Vec<_>>().join("\t");
        let _ = writeln!(out, "{FORMAT_TAG}\t{FORMAT_VERSION}");
        let _ = writeln!(out, "n\t{}", self.n);
        let _ = writeln!(out, "alpha\t{}", self.alpha);
        let _ = writeln!(out, "languages\t{}", self.languages.join("\t"));
        let _ = writeln!(out, "totals\t{}", join(&mut self.totals.iter().map(u64::to_string)));
        let _ = writeln!(out, "prior\t{}", join(&mut self.log_prior.iter().map(f64::to_string)));
        let _ = writeln!(out, "unknown\t{}", join(&mut self.unk_log_prob.iter().map(f64::to_string)));
        let _ = writeln!(out, "grams\t{}", self.table.len());
        let mut grams: Vec<_> = self.table.iter().collect();
        grams.sort_by(|a, b| a.0.cmp(b.0));
        for (g, lp) in grams {
            let _ = writeln!(out, "{g}\t{}", join(&mut lp.iter().map(f64::to_string)));
        }
        out
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file), path)
    }

    pub fn read(reader: impl BufRead, path: &Path) -> Result<Self> {
        let mut lines = reader.lines().enumerate();
        let err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut header = |key: &str| -> Result<(usize, Vec<String>)> {
            let (i, line) = lines
                .next()
                .ok_or_else(|| err(0, format!("unexpected end of file, expected {key:?}")))?;
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut fields = line.split('\t').map(str::to_owned);
            if fields.next().as_deref() != Some(key) {
                return Err(err(i + 1, format!("expected {key:?} header")));
            }
            Ok((i + 1, fields.collect()))
        };
        let (ln, v) = header(FORMAT_TAG)?;
        if v != [FORMAT_VERSION.to_string()] {
            return Err(err(ln, format!("unsupported version {v:?}")));
        }
        let (ln, v) = header("n")?;
        let n: usize = parse_one(&v).filter(|&n| n > 0).ok_or_else(|| err(ln, "bad gram length".into()))?;
        let (ln, v) = header("alpha")?;
        let alpha: f64 = parse_one(&v).filter(|a: &f64| *a > 0.0).ok_or_else(|| err(ln, "bad alpha".into()))?;
        let (ln, languages) = header("languages")?;
        if languages.len() < 2 || languages.windows(2).any(|w| w[0] >= w[1]) {
            return Err(err(ln, "languages must be at least two, sorted and distinct".into()));
        }
        let l = languages.len();
        let (ln, v) = header("totals")?;
        let totals: Vec<u64> = parse_all(&v, l).ok_or_else(|| err(ln, "bad totals row".into()))?;
        let (ln, v) = header("prior")?;
        let log_prior: Vec<f64> = parse_all(&v, l).ok_or_else(|| err(ln, "bad prior row".into()))?;
        let (ln, v) = header("unknown")?;
        let unk_log_prob: Vec<f64> = parse_all(&v, l).ok_or_else(|| err(ln, "bad unknown row".into()))?;
        let (ln, v) = header("grams")?;
        let count: usize = parse_one(&v).ok_or_else(|| err(ln, "bad gram count".into()))?;
        let mut table = HashMap::with_capacity(count);
        for (i, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            let (gram, rest) = line
                .split_once('\t')
                .ok_or_else(|| err(i + 1, "expected gram and log-probabilities".into()))?;
            if gram.chars().count() != n {
                return Err(err(i + 1, format!("gram {gram:?} does not have {n} characters")));
            }
            let fields: Vec<String> = rest.split('\t').map(str::to_owned).collect();
            let lp: Vec<f64> = parse_all(&fields, l).ok_or_else(|| err(i + 1, "bad log-probability row".into()))?;
            table.insert(gram.to_string(), lp);
        }
        if table.len() != count {
            return Err(err(0, format!("expected {count} grams, found {}", table.len())));
        }
        Ok(LidModel {
            n,
            alpha,
            languages,
            totals,
            log_prior,
            unk_log_prob,
            table,
        })
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(self.to_text().as_bytes())
    }
}

fn parse_one<T: std::str::FromStr>(v: &[String]) -> Option<T> {
    match v {
        [x] => x.parse().ok(),
        _ => None,
    }
}

fn parse_all<T: std::str::FromStr>(v: &[String], len: usize) -> Option<Vec<T>> {
    if v.len() != len {
        return None;
    }
    v.iter().map(|x| x.parse().ok()).collect()
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
