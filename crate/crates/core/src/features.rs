//! Tokenization and the eight per-document quality features.

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::charclass;
use crate::corpus_io::{script_of, Document};
use crate::error::{Error, Result};
use crate::lang_id::LidModel;
use crate::lexicons::{fold, Lexicons, SpecialChars};
use crate::ngram_lm::{self, LanguageModel};

pub const FEATURE_COUNT: usize = 8;

/// Column names, in feature-vector order.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "n_words",
    "r_char_rep",
    "r_word_rep",
    "r_special",
    "r_stop",
    "r_flag",
    "s_lid",
    "s_ppl",
];

pub const DEFAULT_CHAR_GRAM: usize = 10;
pub const DEFAULT_WORD_GRAM: usize = 2;

/// Scripts tokenized character by character.
pub const SEPARATOR_FREE_SCRIPTS: [&str; 10] = [
    "Hani", "Hans", "Hant", "Jpan", "Hira", "Kana", "Thai", "Khmr", "Laoo", "Mymr",
];

/// The quality vector of one document.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector {
    pub n_words: f64,
    pub r_char_rep: f64,
    pub r_word_rep: f64,
    pub r_special: f64,
    pub r_stop: f64,
    pub r_flag: f64,
    pub s_lid: f64,
    pub s_ppl: f64,
}

impl FeatureVector {
    pub fn to_array(&self) -> [f64; FEATURE_COUNT] {
        [
            self.n_words,
            self.r_char_rep,
            self.r_word_rep,
            self.r_special,
            self.r_stop,
            self.r_flag,
            self.s_lid,
            self.s_ppl,
        ]
    }

    pub fn from_array(a: [f64; FEATURE_COUNT]) -> Self {
        FeatureVector {
            n_words: a[0],
            r_char_rep: a[1],
            r_word_rep: a[2],
            r_special: a[3],
            r_stop: a[4],
            r_flag: a[5],
            s_lid: a[6],
            s_ppl: a[7],
        }
    }

    pub fn get(&self, index: usize) -> f64 {
        self.to_array()[index]
    }

    /// Index of a feature by column name.
    pub fn index_of(name: &str) -> Option<usize> {
        FEATURE_NAMES.iter().position(|n| *n == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerMode {
    /// Maximal runs of letters, marks and digits.
    Words,
    /// Every letter or digit of an unsegmented script is a token; runs of
    /// other scripts are handled as in `Words`.
    Chars,
}

impl std::str::FromStr for TokenizerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "words" | "word" => Ok(TokenizerMode::Words),
            "chars" | "char" => Ok(TokenizerMode::Chars),
            other => Err(Error::invalid(format!("unknown tokenizer mode {other:?}"))),
        }
    }
}

/// Default tokenizer for a language code, chosen by its script suffix.
pub fn mode_for(lang: &str) -> TokenizerMode {
    match script_of(lang) {
        Some(s) if SEPARATOR_FREE_SCRIPTS.contains(&s) => TokenizerMode::Chars,
        _ => TokenizerMode::Words,
    }
}

pub fn tokenize(text: &str, lang: &str) -> Vec<String> {
    tokenize_with(text, mode_for(lang))
}

pub fn tokenize_with(text: &str, mode: TokenizerMode) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    // Whether `current` is a single unsegmented-script character that may
    // only absorb trailing marks.
    let mut single = false;
    let flush = |cur: &mut String, out: &mut Vec<String>| {
        if !cur.is_empty() {
            out.push(fold(cur));
            cur.clear();
        }
    };
    for c in text.chars() {
        if !charclass::is_word_char(c) {
            flush(&mut current, &mut tokens);
            single = false;
            continue;
        }
        if mode == TokenizerMode::Chars && charclass::is_unsegmented_script(c) && !charclass::is_mark(c) {
            flush(&mut current, &mut tokens);
            current.push(c);
            single = true;
            continue;
        }
        if single && !charclass::is_mark(c) {
            flush(&mut current, &mut tokens);
            single = false;
        }
        current.push(c);
    }
    flush(&mut current, &mut tokens);
    tokens
}

pub fn word_count<T>(tokens: &[T]) -> usize {
    tokens.len()
}

/// Fraction of k-gram occurrences whose k-gram occurs more than once.
fn duplicated_fraction<T: Hash + Eq>(items: &[T], k: usize) -> f64 {
    if items.len() < k {
        return 0.0;
    }
    let total = items.len() - k + 1;
    let mut counts: HashMap<&[T], u32> = HashMap::with_capacity(total);
    for w in items.windows(k) {
        *counts.entry(w).or_insert(0) += 1;
    }
    let repeated: u64 = counts.values().filter(|&&c| c > 1).map(|&c| c as u64).sum();
    repeated as f64 / total as f64
}

pub fn char_repetition_ratio(text: &str, k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("character gram length must be at least 1"));
    }
    let chars: Vec<char> = text.chars().collect();
    Ok(duplicated_fraction(&chars, k))
}

pub fn word_repetition_ratio<S: AsRef<str>>(tokens: &[S], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("word gram length must be at least 1"));
    }
    let refs: Vec<&str> = tokens.iter().map(AsRef::as_ref).collect();
    Ok(duplicated_fraction(&refs, k))
}

pub fn special_char_ratio(text: &str, specials: &SpecialChars) -> f64 {
    let mut total = 0usize;
    let mut special = 0usize;
    for c in text.chars() {
        total += 1;
        if specials.contains(c) {
            special += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        special as f64 / total as f64
    }
}

/// Share of tokens found in `lexicon`. Tokens are expected to be case-folded
/// already, as [`tokenize`] returns them.
pub fn lexicon_ratio<S: AsRef<str>>(tokens: &[S], lexicon: &std::collections::HashSet<String>) -> f64 {
    if tokens.is_empty() || lexicon.is_empty() {
        return 0.0;
    }
    let hits = tokens.iter().filter(|t| lexicon.contains(t.as_ref())).count();
    hits as f64 / tokens.len() as f64
}

/// Gram lengths and tokenizer choices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub char_gram: usize,
    pub word_gram: usize,
    /// Per-language tokenizer overrides, keyed by full language code.
    #[serde(default)]
    pub tokenizer_overrides: BTreeMap<String, TokenizerMode>,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            char_gram: DEFAULT_CHAR_GRAM,
            word_gram: DEFAULT_WORD_GRAM,
            tokenizer_overrides: BTreeMap::new(),
        }
    }
}

impl FeatureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.char_gram == 0 || self.word_gram == 0 {
            return Err(Error::invalid("gram lengths must be at least 1"));
        }
        Ok(())
    }

    pub fn mode(&self, lang: &str) -> TokenizerMode {
        self.tokenizer_overrides
            .get(lang)
            .copied()
            .unwrap_or_else(|| mode_for(lang))
    }
}

/// Models and word lists shared by all feature extractions.
#[derive(Debug, Default)]
pub struct Resources {
    pub lexicons: Lexicons,
    pub lid: Option<LidModel>,
    pub language_models: HashMap<String, LanguageModel>,
}

impl Resources {
    pub fn new(lexicons: Lexicons) -> Self {
        Resources {
            lexicons,
            ..Default::default()
        }
    }

    /// Loads every `<lang>.arpa` in `dir`.
    pub fn load_models_dir(&mut self, dir: impl AsRef<Path>) -> Result<usize> {
        let dir = dir.as_ref();
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "arpa"))
            .collect();
        paths.sort();
        for p in &paths {
            let Some(lang) = p.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let model = ngram_lm::load_arpa(p)?.with_lang(lang);
            self.language_models.insert(lang.to_string(), model);
        }
        Ok(paths.len())
    }
}

/// Computes the feature vector of one document.
pub fn extract_features(doc: &Document, resources: &Resources, config: &FeatureConfig) -> FeatureVector {
    let mode = config.mode(&doc.lang);
    let sentences: Vec<Vec<String>> = doc
        .text
        .lines()
        .map(|l| tokenize_with(l, mode))
        .filter(|t| !t.is_empty())
        .collect();
    let tokens: Vec<&str> = sentences.iter().flatten().map(String::as_str).collect();

    let r_char_rep = duplicated_fraction(&doc.text.chars().collect::<Vec<_>>(), config.char_gram.max(1));
    let r_word_rep = duplicated_fraction(&tokens, config.word_gram.max(1));
    let lx = &resources.lexicons;

    let s_lid = match &resources.lid {
        Some(model) => model.confidence_for(&doc.text, &doc.lang),
        None => 1.0,
    };
    let s_ppl = resources
        .language_models
        .get(&doc.lang)
        .and_then(|lm| lm.perplexity_sentences(&sentences).ok())
        .unwrap_or(ngram_lm::DEFAULT_PERPLEXITY);

    FeatureVector {
        n_words: tokens.len() as f64,
        r_char_rep,
        r_word_rep,
        r_special: special_char_ratio(&doc.text, &lx.special_chars),
        r_stop: lexicon_ratio(&tokens, lx.stopwords(&doc.lang)),
        r_flag: lexicon_ratio(&tokens, lx.flagged(&doc.lang)),
        s_lid,
        s_ppl,
    }
}
