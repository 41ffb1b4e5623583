//! Per-language word lists and the special-character set.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use crate::charclass;
use crate::error::{Error, Result};

/// Case folding applied to lexicon entries and to tokens before lookup.
pub fn fold(s: &str) -> String {
    s.to_lowercase()
}

/// Reads a word list: one entry per line, `#` starts a comment line,
/// entries are trimmed and case-folded, duplicates collapse.
pub fn load_wordlist(path: impl AsRef<Path>) -> Result<HashSet<String>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let set = parse_wordlist(&text);
    if set.is_empty() {
        log::warn!("word list {} is empty", path.display());
    }
    Ok(set)
}

pub fn parse_wordlist(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(fold)
        .collect()
}

/// Characters counted by the special-character ratio.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum SpecialChars {
    /// Unicode punctuation, symbols, numbers and whitespace variants other
    /// than U+0020.
    #[default]
    Categories,
    Explicit(HashSet<char>),
}

impl SpecialChars {
    #[inline]
    pub fn contains(&self, c: char) -> bool {
        match self {
            SpecialChars::Categories => charclass::is_default_special(c),
            SpecialChars::Explicit(set) => set.contains(&c),
        }
    }

    /// Reads an override file: one character or `U+XXXX` escape per line,
    /// `#` comment lines.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|(line, message)| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        })
    }

    pub fn parse(text: &str) -> std::result::Result<Self, (usize, String)> {
        let mut set = HashSet::new();
        for (i, line) in text.lines().enumerate() {
            // A lone space or tab line is a legitimate entry; only strip the
            // line terminator noise around multi-char escapes.
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let entry = if line.chars().count() == 1 { line } else { line.trim() };
            let mut chars = entry.chars();
            let c = match (chars.next(), chars.next()) {
                (Some(c), None) => c,
                _ => parse_escape(entry).ok_or_else(|| (i + 1, format!("expected one character or U+XXXX, got {entry:?}")))?,
            };
            set.insert(c);
        }
        Ok(SpecialChars::Explicit(set))
    }
}

fn parse_escape(s: &str) -> Option<char> {
    let hex = s.strip_prefix("U+").or_else(|| s.strip_prefix("u+"))?;
    u32::from_str_radix(hex, 16).ok().and_then(char::from_u32)
}

/// The default special-character set.
pub fn default_special_chars() -> SpecialChars {
    SpecialChars::Categories
}

/// Stopwords, flagged words and special characters for all languages.
///
/// Word lists are keyed by full language code (`eng_Latn`) or by the bare
/// ISO 639-3 code (`eng`); the full code wins. A language without a list
/// gets an empty set.
#[derive(Debug, Clone, Default)]
pub struct Lexicons {
    stopwords: HashMap<String, HashSet<String>>,
    flagged: HashMap<String, HashSet<String>>,
    pub special_chars: SpecialChars,
}

static EMPTY: std::sync::OnceLock<HashSet<String>> = std::sync::OnceLock::new();

fn lookup<'a>(map: &'a HashMap<String, HashSet<String>>, lang: &str) -> &'a HashSet<String> {
    map.get(lang)
        .or_else(|| lang.split_once('_').and_then(|(iso, _)| map.get(iso)))
        .unwrap_or_else(|| EMPTY.get_or_init(HashSet::new))
}

impl Lexicons {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn stopwords(&self, lang: &str) -> &HashSet<String> {
        lookup(&self.stopwords, lang)
    }

    pub fn flagged(&self, lang: &str) -> &HashSet<String> {
        lookup(&self.flagged, lang)
    }

    pub fn insert_stopwords(&mut self, lang: impl Into<String>, words: HashSet<String>) {
        self.stopwords.insert(lang.into(), words);
    }

    pub fn insert_flagged(&mut self, lang: impl Into<String>, words: HashSet<String>) {
        self.flagged.insert(lang.into(), words);
    }

    /// Loads every `<lang>.txt` in `dir` as a stopword list.
    pub fn load_stopwords_dir(&mut self, dir: impl AsRef<Path>) -> Result<usize> {
        load_dir(dir.as_ref(), &mut self.stopwords)
    }

    /// Loads every `<lang>.txt` in `dir` as a flagged-word list.
    pub fn load_flagged_dir(&mut self, dir: impl AsRef<Path>) -> Result<usize> {
        load_dir(dir.as_ref(), &mut self.flagged)
    }
}

fn load_dir(dir: &Path, into: &mut HashMap<String, HashSet<String>>) -> Result<usize> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "txt"))
        .collect();
    paths.sort();
    for p in &paths {
        let Some(stem) = p.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        into.insert(stem.to_string(), load_wordlist(p)?);
    }
    Ok(paths.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn duplicates_collapse() {
        let f = file("the\nand\nthe\n");
        let set = load_wordlist(f.path()).unwrap();
        assert_eq!(set.len(), 2);
        assert!(set.contains("the") && set.contains("and"));
    }

    #[test]
    fn comments_skipped() {
        let f = file("# comment\nfoo\n");
        assert_eq!(load_wordlist(f.path()).unwrap(), HashSet::from(["foo".to_string()]));
    }

    #[test]
    fn case_folded() {
        let f = file("A\na\n");
        assert_eq!(load_wordlist(f.path()).unwrap(), HashSet::from(["a".to_string()]));
    }

    #[test]
    fn idempotent_load() {
        let f = file("x\n  y  \n\n#z\nY\n");
        assert_eq!(load_wordlist(f.path()).unwrap(), load_wordlist(f.path()).unwrap());
    }

    #[test]
    fn empty_list_is_ok() {
        let f = file("# nothing\n\n");
        assert!(load_wordlist(f.path()).unwrap().is_empty());
    }

    #[test]
    fn missing_file_errors() {
        assert!(matches!(load_wordlist("/nonexistent/list.txt"), Err(Error::Io { .. })));
    }

    #[test]
    fn default_specials() {
        let s = default_special_chars();
        assert!(s.contains('!'));
        assert!(!s.contains('a'));
        assert!(s.contains('7'));
        assert!(!s.contains(' '));
        assert!(s.contains('\t'));
        assert!(s.contains('\u{3000}'));
        assert!(s.contains('😀'));
        assert!(s.contains('，'));
        assert!(!s.contains('你'));
    }

    #[test]
    fn default_specials_exclude_letters_and_marks() {
        let s = default_special_chars();
        for cp in 0..=0x10FFFFu32 {
            if let Some(c) = char::from_u32(cp) {
                if s.contains(c) {
                    assert!(!charclass::is_letter_or_mark(c), "U+{cp:04X}");
                }
            }
        }
    }

    #[test]
    fn override_file() {
        let s = SpecialChars::parse("# specials\n!\nU+0041\n \n").unwrap();
        assert!(s.contains('!'));
        assert!(s.contains('A'));
        assert!(s.contains(' '));
        assert!(!s.contains('?'));
        assert_eq!(SpecialChars::parse("ab\n").unwrap_err().0, 1);
    }

    #[test]
    fn language_fallbacks() {
        let mut lx = Lexicons::new();
        lx.insert_stopwords("eng", HashSet::from(["the".to_string()]));
        lx.insert_stopwords("deu_Latn", HashSet::from(["der".to_string()]));
        assert!(lx.stopwords("eng_Latn").contains("the"));
        assert!(lx.stopwords("deu_Latn").contains("der"));
        assert!(lx.stopwords("fra_Latn").is_empty());
        assert!(lx.flagged("eng_Latn").is_empty());
    }
}
