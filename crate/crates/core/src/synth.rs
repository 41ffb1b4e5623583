//! Seeded synthetic corpora: fluent documents in an invented Latin-script
//! language, and labelled noise documents of three kinds.
//!
//! The vocabularies are fixed; only the documents depend on the seed.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::corpus_io::Document;
use crate::error::{Error, Result};

/// Code of the fluent language (ISO 639-3 local-use range).
pub const FLUENT_LANG: &str = "qaa_Latn";
/// Code of the second, Cyrillic-script language used for injections.
pub const FOREIGN_LANG: &str = "qab_Cyrl";

const STOPWORD_COUNT: usize = 40;
const VOCAB_SIZE: usize = 3000;
const ZIPF_EXPONENT: f64 = 1.07;
const FLAGGED: [&str; 8] = ["zorbex", "kwazil", "spamix", "yubbo", "cashurr", "vexxo", "pillzo", "wokkit"];
const SYMBOL_RUNS: [&str; 12] = ["$$$", "###", "!!!", "★★★", ">>>", "@@", "%%%", "***", "+++", "→→", "|||", "~~~"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    RepetitionSpam,
    WrongLanguage,
    SymbolFlood,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 3] = [NoiseKind::RepetitionSpam, NoiseKind::WrongLanguage, NoiseKind::SymbolFlood];
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::RepetitionSpam => "repetition_spam",
            NoiseKind::WrongLanguage => "wrong_language",
            NoiseKind::SymbolFlood => "symbol_flood",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthDoc {
    pub doc: Document,
    /// `None` for fluent documents.
    pub noise: Option<NoiseKind>,
}

struct Vocabulary {
    words: Vec<String>,
    cumulative: Vec<f64>,
}

impl Vocabulary {
    fn build(consonants: &[char], vowels: &[char], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = HashSet::new();
        let mut words = Vec::with_capacity(VOCAB_SIZE);
        while words.len() < VOCAB_SIZE {
            // Frequent words are short, as function words are.
            let syllables = if words.len() < STOPWORD_COUNT {
                1
            } else {
                rng.random_range(1..=4)
            };
            let mut w = String::new();
            for _ in 0..syllables {
                w.push(*consonants.choose(&mut rng).expect("consonants"));
                w.push(*vowels.choose(&mut rng).expect("vowels"));
                if rng.random_bool(0.3) {
                    w.push(*consonants.choose(&mut rng).expect("consonants"));
                }
            }
            if seen.insert(w.clone()) {
                words.push(w);
            }
        }
        let mut acc = 0.0;
        let cumulative = (0..VOCAB_SIZE)
            .map(|r| {
                acc += 1.0 / ((r + 1) as f64).powf(ZIPF_EXPONENT);
                acc
            })
            .collect();
        Vocabulary { words, cumulative }
    }

    fn word(&self, rng: &mut ChaCha8Rng) -> &str {
        let u = rng.random::<f64>() * self.cumulative[VOCAB_SIZE - 1];
        let i = self.cumulative.partition_point(|&c| c < u).min(VOCAB_SIZE - 1);
        &self.words[i]
    }

    fn sentence(&self, rng: &mut ChaCha8Rng) -> String {
        let n = rng.random_range(6..=18);
        let mut s = String::new();
        for i in 0..n {
            if i > 0 {
                s.push_str(if rng.random_bool(0.08) { ", " } else { " " });
            }
            let w = self.word(rng);
            if i == 0 {
                let mut cs = w.chars();
                if let Some(c) = cs.next() {
                    s.extend(c.to_uppercase());
                    s.push_str(cs.as_str());
                }
            } else {
                s.push_str(w);
            }
        }
        s.push('.');
        s
    }

    /// Paragraphs of one to three sentences, one paragraph per line.
    fn text(&self, rng: &mut ChaCha8Rng, sentences: usize) -> String {
        let mut out = String::new();
        let mut left = sentences;
        while left > 0 {
            let k = rng.random_range(1..=3).min(left);
            if !out.is_empty() {
                out.push('\n');
            }
            let para: Vec<String> = (0..k).map(|_| self.sentence(rng)).collect();
            out.push_str(&para.join(" "));
            left -= k;
        }
        out
    }
}

fn fluent_vocab() -> &'static Vocabulary {
    static V: OnceLock<Vocabulary> = OnceLock::new();
    V.get_or_init(|| {
        let c: Vec<char> = "ptkbdgmnlrsvfhj".chars().collect();
        let v: Vec<char> = "aeiou".chars().collect();
        Vocabulary::build(&c, &v, 0x5eed_0001)
    })
}

fn foreign_vocab() -> &'static Vocabulary {
    static V: OnceLock<Vocabulary> = OnceLock::new();
    V.get_or_init(|| {
        let c: Vec<char> = "бвгджзклмнпрстфхцчш".chars().collect();
        let v: Vec<char> = "аеиоуыэюя".chars().collect();
        Vocabulary::build(&c, &v, 0x5eed_0002)
    })
}

/// The most frequent words of the fluent language.
pub fn stopwords() -> HashSet<String> {
    fluent_vocab().words[..STOPWORD_COUNT].iter().cloned().collect()
}

pub fn flagged_words() -> HashSet<String> {
    FLAGGED.iter().map(|s| s.to_string()).collect()
}

pub struct Generator {
    rng: ChaCha8Rng,
}

impl Generator {
    pub fn new(seed: u64) -> Self {
        Generator {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn fluent_text(&mut self) -> String {
        let sentences = self.rng.random_range(1..=9);
        let mut text = fluent_vocab().text(&mut self.rng, sentences);
        if self.rng.random_bool(0.03) {
            text.push(' ');
            text.push_str(FLAGGED.choose(&mut self.rng).expect("flagged"));
            text.push('.');
        }
        if self.rng.random_bool(0.1) {
            let year = self.rng.random_range(1900..2030);
            text.push_str(&format!(" ({year})"));
        }
        text
    }

    pub fn foreign_text(&mut self) -> String {
        let sentences = self.rng.random_range(1..=9);
        foreign_vocab().text(&mut self.rng, sentences)
    }

    pub fn noise_text(&mut self, kind: NoiseKind) -> String {
        let rng = &mut self.rng;
        match kind {
            NoiseKind::RepetitionSpam => {
                let len = rng.random_range(2..=5);
                let mut phrase: Vec<String> = (0..len).map(|_| fluent_vocab().word(rng).to_string()).collect();
                if rng.random_bool(0.5) {
                    phrase[0] = FLAGGED.choose(rng).expect("flagged").to_string();
                }
                let phrase = phrase.join(" ");
                let reps = rng.random_range(8..=40);
                let sep = if rng.random_bool(0.5) { " " } else { "! " };
                vec![phrase; reps].join(sep)
            }
            NoiseKind::WrongLanguage => {
                let mut text = String::new();
                if rng.random_bool(0.3) {
                    text.push_str(&fluent_vocab().sentence(rng));
                    text.push('\n');
                }
                let sentences = rng.random_range(2..=8);
                text.push_str(&foreign_vocab().text(rng, sentences));
                text
            }
            NoiseKind::SymbolFlood => {
                let n = rng.random_range(10..=60);
                let word_share = rng.random_range(0.1..0.5);
                let mut parts = Vec::with_capacity(n);
                for _ in 0..n {
                    if rng.random_bool(word_share) {
                        parts.push(fluent_vocab().word(rng).to_string());
                    } else {
                        parts.push(SYMBOL_RUNS.choose(rng).expect("symbols").to_string());
                    }
                }
                parts.join(" ")
            }
        }
    }

    pub fn fluent_doc(&mut self, id: impl Into<String>) -> SynthDoc {
        SynthDoc {
            doc: Document::new(id, FLUENT_LANG, self.fluent_text()),
            noise: None,
        }
    }

    pub fn noise_doc(&mut self, id: impl Into<String>, kind: NoiseKind) -> SynthDoc {
        SynthDoc {
            doc: Document::new(id, FLUENT_LANG, self.noise_text(kind)),
            noise: Some(kind),
        }
    }

    fn shuffle<T>(&mut self, v: &mut [T]) {
        use rand::seq::SliceRandom;
        v.shuffle(&mut self.rng);
    }
}

/// `n` fluent documents.
pub fn homogeneous_corpus(n: usize, seed: u64) -> Vec<SynthDoc> {
    let mut g = Generator::new(seed);
    (0..n).map(|i| g.fluent_doc(format!("doc-{i:07}"))).collect()
}

/// `n_fluent` fluent documents and `n_noise` noise documents (kinds in
/// rotation) in seeded random order.
pub fn mixed_corpus(n_fluent: usize, n_noise: usize, seed: u64) -> Vec<SynthDoc> {
    let mut g = Generator::new(seed);
    let mut docs: Vec<SynthDoc> = (0..n_fluent).map(|i| g.fluent_doc(format!("fluent-{i:07}"))).collect();
    for i in 0..n_noise {
        let kind = NoiseKind::ALL[i % NoiseKind::ALL.len()];
        docs.push(g.noise_doc(format!("noise-{i:07}"), kind));
    }
    g.shuffle(&mut docs);
    docs
}

/// Writes `{"id","lang","text"}` lines.
pub fn write_jsonl(docs: &[SynthDoc], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = std::io::BufWriter::new(file);
    for d in docs {
        let line = json!({"id": d.doc.id, "lang": d.doc.lang, "text": d.doc.text});
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

/// Training text per language for a language identifier.
pub fn lid_samples(per_language: usize, seed: u64) -> BTreeMap<String, Vec<String>> {
    let mut g = Generator::new(seed);
    let mut m = BTreeMap::new();
    m.insert(FLUENT_LANG.to_string(), (0..per_language).map(|_| g.fluent_text()).collect());
    m.insert(FOREIGN_LANG.to_string(), (0..per_language).map(|_| g.foreign_text()).collect());
    m
}

/// Fluent lines for language-model training.
pub fn lm_sentences(n: usize, seed: u64) -> Vec<String> {
    let mut g = Generator::new(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        for line in g.fluent_text().lines() {
            if out.len() < n {
                out.push(line.to_string());
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        assert_eq!(mixed_corpus(50, 10, 3), mixed_corpus(50, 10, 3));
        assert_ne!(mixed_corpus(50, 10, 3), mixed_corpus(50, 10, 4));
    }

    #[test]
    fn composition() {
        let docs = mixed_corpus(100, 30, 1);
        assert_eq!(docs.iter().filter(|d| d.noise.is_none()).count(), 100);
        for k in NoiseKind::ALL {
            assert_eq!(docs.iter().filter(|d| d.noise == Some(k)).count(), 10);
        }
        let ids: HashSet<&str> = docs.iter().map(|d| d.doc.id.as_str()).collect();
        assert_eq!(ids.len(), 130);
    }

    #[test]
    fn vocabularies() {
        assert_eq!(stopwords().len(), STOPWORD_COUNT);
        assert!(stopwords().is_disjoint(&flagged_words()));
        assert!(foreign_vocab().words.iter().all(|w| w.chars().all(|c| ('\u{0400}'..='\u{04FF}').contains(&c))));
    }
}
