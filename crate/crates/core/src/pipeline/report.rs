//! Per-language keep/remove accounting and its TSV form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::anomaly::Label;
use crate::corpus_io::{DocumentReader, OnError};
use crate::error::{Error, Result};
use crate::features::{tokenize_with, FeatureConfig};

pub const FLAG_INSUFFICIENT_DATA: &str = "unfiltered:insufficient_data";
pub const ERROR_FLAG_PREFIX: &str = "error:";

pub const REPORT_COLUMNS: [&str; 11] = [
    "lang",
    "docs_keep",
    "docs_remove",
    "docs_total",
    "tokens_keep",
    "tokens_remove",
    "tokens_total",
    "bytes_keep",
    "bytes_remove",
    "bytes_total",
    "flags",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct KeepRemove {
    pub keep: u64,
    pub remove: u64,
}

impl KeepRemove {
    pub fn total(&self) -> u64 {
        self.keep + self.remove
    }

    pub fn add(&mut self, label: Label, n: u64) {
        match label {
            Label::Keep => self.keep += n,
            Label::Remove => self.remove += n,
        }
    }

    fn merge(&mut self, other: &KeepRemove) {
        self.keep += other.keep;
        self.remove += other.remove;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LanguageReport {
    pub docs: KeepRemove,
    pub tokens: KeepRemove,
    pub bytes: KeepRemove,
    pub flags: Vec<String>,
}

impl LanguageReport {
    pub fn record(&mut self, label: Label, tokens: u64, bytes: u64) {
        self.docs.add(label, 1);
        self.tokens.add(label, tokens);
        self.bytes.add(label, bytes);
    }

    pub fn merge(&mut self, other: &LanguageReport) {
        self.docs.merge(&other.docs);
        self.tokens.merge(&other.tokens);
        self.bytes.merge(&other.bytes);
        for f in &other.flags {
            if !self.flags.contains(f) {
                self.flags.push(f.clone());
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct CleanReport {
    pub languages: BTreeMap<String, LanguageReport>,
    pub malformed: u64,
    /// Wall-clock seconds per phase, in execution order.
    pub timings: Vec<(String, f64)>,
    pub config_hash: Option<String>,
}

impl CleanReport {
    pub fn total(&self) -> LanguageReport {
        let mut t = LanguageReport::default();
        for r in self.languages.values() {
            t.docs.merge(&r.docs);
            t.tokens.merge(&r.tokens);
            t.bytes.merge(&r.bytes);
        }
        t
    }

    /// Removed documents over all documents; 0 for an empty corpus.
    pub fn removal_fraction(&self) -> f64 {
        let t = self.total();
        if t.docs.total() == 0 {
            0.0
        } else {
            t.docs.remove as f64 / t.docs.total() as f64
        }
    }

    pub fn retained_fraction(&self) -> f64 {
        let t = self.total();
        if t.docs.total() == 0 {
            1.0
        } else {
            t.docs.keep as f64 / t.docs.total() as f64
        }
    }

    /// True when some language failed and was passed through.
    pub fn has_failures(&self) -> bool {
        self.languages
            .values()
            .any(|r| r.flags.iter().any(|f| f.starts_with(ERROR_FLAG_PREFIX)))
    }

    pub fn flag(&mut self, lang: &str, flag: impl Into<String>) {
        let flag = flag.into();
        let flags = &mut self.languages.entry(lang.to_string()).or_default().flags;
        if !flags.contains(&flag) {
            flags.push(flag);
        }
    }

    pub fn timing(&self, phase: &str) -> Option<f64> {
        self.timings.iter().find(|(p, _)| p == phase).map(|(_, s)| *s)
    }

    /// The TSV table: optional `# config_hash=` and `# malformed=` comment
    /// lines, the header, one row per language in code order, then TOTAL.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        if let Some(h) = &self.config_hash {
            let _ = writeln!(out, "# config_hash={h}");
        }
        let _ = writeln!(out, "# malformed={}", self.malformed);
        out.push_str(&REPORT_COLUMNS.join("\t"));
        out.push('\n');
        let row = |out: &mut String, lang: &str, r: &LanguageReport| {
            let flags = if r.flags.is_empty() {
                "-".to_string()
            } else {
                r.flags.iter().map(|f| sanitize(f)).collect::<Vec<_>>().join(",")
            };
            let _ = writeln!(
                out,
                "{lang}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{flags}",
                r.docs.keep,
                r.docs.remove,
                r.docs.total(),
                r.tokens.keep,
                r.tokens.remove,
                r.tokens.total(),
                r.bytes.keep,
                r.bytes.remove,
                r.bytes.total(),
            );
        };
        for (lang, r) in &self.languages {
            row(&mut out, lang, r);
        }
        row(&mut out, "TOTAL", &self.total());
        out
    }

    /// Reads back a table written by [`CleanReport::to_tsv`]. Timings are not
    /// part of the table and come back empty.
    pub fn parse_tsv(text: &str) -> Result<CleanReport> {
        let mut report = CleanReport::default();
        let bad = |line: usize, message: String| Error::Parse {
            path: "<report>".into(),
            line,
            message,
        };
        let mut header_seen = false;
        let mut total_seen = false;
        for (i, line) in text.lines().enumerate() {
            let no = i + 1;
            if let Some(c) = line.strip_prefix('#') {
                let c = c.trim();
                if let Some(h) = c.strip_prefix("config_hash=") {
                    report.config_hash = Some(h.to_string());
                } else if let Some(m) = c.strip_prefix("malformed=") {
                    report.malformed = m.parse().map_err(|e| bad(no, format!("malformed count: {e}")))?;
                }
                continue;
            }
            let cells: Vec<&str> = line.split('\t').collect();
            if !header_seen {
                if cells != REPORT_COLUMNS {
                    return Err(bad(no, "unexpected header".into()));
                }
                header_seen = true;
                continue;
            }
            if cells.len() != REPORT_COLUMNS.len() {
                return Err(bad(no, format!("expected {} columns, got {}", REPORT_COLUMNS.len(), cells.len())));
            }
            let mut n = [0u64; 9];
            for (v, cell) in n.iter_mut().zip(&cells[1..10]) {
                *v = cell.parse().map_err(|e| bad(no, format!("{cell:?}: {e}")))?;
            }
            let r = LanguageReport {
                docs: KeepRemove { keep: n[0], remove: n[1] },
                tokens: KeepRemove { keep: n[3], remove: n[4] },
                bytes: KeepRemove { keep: n[6], remove: n[7] },
                flags: match cells[10] {
                    "-" | "" => Vec::new(),
                    f => f.split(',').map(str::to_string).collect(),
                },
            };
            if n[2] != r.docs.total() || n[5] != r.tokens.total() || n[8] != r.bytes.total() {
                return Err(bad(no, "total column differs from keep + remove".into()));
            }
            if cells[0] == "TOTAL" {
                if r.docs != report.total().docs || r.tokens != report.total().tokens || r.bytes != report.total().bytes {
                    return Err(bad(no, "TOTAL row differs from the sum of language rows".into()));
                }
                total_seen = true;
            } else {
                report.languages.insert(cells[0].to_string(), r);
            }
        }
        if !total_seen {
            return Err(bad(text.lines().count(), "missing TOTAL row".into()));
        }
        Ok(report)
    }
}

fn sanitize(flag: &str) -> String {
    flag.chars()
        .map(|c| if c == '\t' || c == '\n' || c == '\r' || c == ',' { ' ' } else { c })
        .collect()
}

pub fn emit_report(report: &CleanReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, report.to_tsv()).map_err(|e| Error::io(path, e))
}

/// Phase timings as `phase<TAB>seconds` lines.
pub fn write_timings(report: &CleanReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("phase\tseconds\n");
    for (phase, s) in &report.timings {
        let _ = writeln!(out, "{phase}\t{s:.6}");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Rebuilds the document, token and byte counts from an output directory's
/// `keep/*.jsonl` and `remove/*.jsonl`. Tokens are recounted with the
/// feature tokenizer.
pub fn report_from_partitions(out_dir: impl AsRef<Path>, features: &FeatureConfig) -> Result<CleanReport> {
    let out_dir = out_dir.as_ref();
    let mut report = CleanReport::default();
    for (sub, label) in [("keep", Label::Keep), ("remove", Label::Remove)] {
        let dir = out_dir.join(sub);
        if !dir.is_dir() {
            continue;
        }
        let mut paths: Vec<_> = std::fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for p in paths {
            let mut reader = DocumentReader::open(&p, OnError::Skip)?;
            for rec in reader.by_ref() {
                let rec = rec?;
                let mode = features.mode(&rec.doc.lang);
                let tokens: usize = rec.doc.text.lines().map(|l| tokenize_with(l, mode).len()).sum();
                report
                    .languages
                    .entry(rec.doc.lang.clone())
                    .or_default()
                    .record(label, tokens as u64, rec.raw.len() as u64 + 1);
            }
            report.malformed += reader.stats().malformed;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_language_row_and_total() {
        let mut r = CleanReport::default();
        for i in 0..10 {
            let label = if i < 7 { Label::Keep } else { Label::Remove };
            r.languages.entry("eng_Latn".into()).or_default().record(label, 5, 20);
        }
        let tsv = r.to_tsv();
        let lines: Vec<&str> = tsv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "eng_Latn\t7\t3\t10\t35\t15\t50\t140\t60\t200\t-");
        assert_eq!(lines[2], "TOTAL\t7\t3\t10\t35\t15\t50\t140\t60\t200\t-");
        assert_eq!(CleanReport::parse_tsv(&tsv).unwrap(), r);
    }

    #[test]
    fn empty_report() {
        let tsv = CleanReport::default().to_tsv();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines[1], REPORT_COLUMNS.join("\t"));
        assert_eq!(lines[2], "TOTAL\t0\t0\t0\t0\t0\t0\t0\t0\t0\t-");
        assert_eq!(lines.len(), 3);
    }

    #[test]
    fn flags_and_failures() {
        let mut r = CleanReport::default();
        r.flag("xho_Latn", FLAG_INSUFFICIENT_DATA);
        r.flag("xho_Latn", FLAG_INSUFFICIENT_DATA);
        assert!(!r.has_failures());
        r.flag("zul_Latn", format!("{ERROR_FLAG_PREFIX}bad\tthing"));
        assert!(r.has_failures());
        let back = CleanReport::parse_tsv(&r.to_tsv()).unwrap();
        assert_eq!(back.languages["xho_Latn"].flags, vec![FLAG_INSUFFICIENT_DATA]);
        assert_eq!(back.languages["zul_Latn"].flags, vec!["error:bad thing"]);
    }

    #[test]
    fn rejects_inconsistent_total() {
        let tsv = format!("{}\nx\t1\t0\t1\t0\t0\t0\t0\t0\t0\t-\nTOTAL\t2\t0\t2\t0\t0\t0\t0\t0\t0\t-\n", REPORT_COLUMNS.join("\t"));
        assert!(CleanReport::parse_tsv(&tsv).is_err());
    }
}
