//! Line-delimited JSON corpus input and output.
//!
//! Each input line is one JSON object with a required `"text"` field and
//! optional `"id"`, `"lang"` and `"source"` fields. Any other fields are
//! carried through untouched because the writer emits the original line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::anomaly::Label;
use crate::error::{Error, Result};
use crate::features::FeatureVector;

/// Language code assigned to records without a `"lang"` field.
pub const UNDETERMINED_LANG: &str = "und_Zzzz";

/// One corpus entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub lang: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl Document {
    pub fn new(id: impl Into<String>, lang: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            id: id.into(),
            lang: lang.into(),
            text: text.into(),
            source: None,
        }
    }

    /// The four-letter script suffix of the language code, if any.
    pub fn script(&self) -> Option<&str> {
        script_of(&self.lang)
    }
}

/// Returns the script part of a code such as `eng_Latn`.
pub fn script_of(lang: &str) -> Option<&str> {
    lang.split_once('_').map(|(_, s)| s)
}

/// Checks the `xxx_Xxxx` shape: three lowercase ASCII letters, an underscore,
/// four ASCII letters.
pub fn is_valid_lang(lang: &str) -> bool {
    let b = lang.as_bytes();
    b.len() == 8
        && b[..3].iter().all(u8::is_ascii_lowercase)
        && b[3] == b'_'
        && b[4..].iter().all(u8::is_ascii_alphabetic)
}

/// A parsed document together with the exact line it came from.
#[derive(Debug, Clone)]
pub struct Record {
    pub doc: Document,
    /// The input line without its trailing newline (after UTF-8 repair).
    pub raw: String,
    /// 1-based line number in the source file.
    pub line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OnError {
    #[default]
    Skip,
    Abort,
}

impl std::str::FromStr for OnError {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "skip" => Ok(OnError::Skip),
            "abort" => Ok(OnError::Abort),
            other => Err(Error::invalid(format!(
                "on-error mode must be skip or abort, got {other:?}"
            ))),
        }
    }
}

/// Counters kept by a [`DocumentReader`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadStats {
    /// Non-blank lines seen.
    pub lines: u64,
    pub documents: u64,
    pub malformed: u64,
    /// Whitespace-only lines; ignored and not counted in `lines`.
    pub blank: u64,
    /// Lines that contained invalid UTF-8 and were repaired with U+FFFD.
    pub repaired: u64,
}

/// A skipped line, kept so callers can log it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedLine {
    pub path: PathBuf,
    pub line: usize,
    pub message: String,
}

/// Streaming reader over one JSON Lines file.
pub struct DocumentReader<R> {
    reader: R,
    path: PathBuf,
    file_name: String,
    mode: OnError,
    line_no: usize,
    stats: ReadStats,
    malformed: Vec<MalformedLine>,
    buf: Vec<u8>,
    done: bool,
}

impl DocumentReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>, mode: OnError) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::new(BufReader::new(file), path, mode))
    }
}

impl<R: BufRead> DocumentReader<R> {
    pub fn new(reader: R, path: impl Into<PathBuf>, mode: OnError) -> Self {
        let path = path.into();
        let file_name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.to_string_lossy().into_owned());
        DocumentReader {
            reader,
            path,
            file_name,
            mode,
            line_no: 0,
            stats: ReadStats::default(),
            malformed: Vec::new(),
            buf: Vec::new(),
            done: false,
        }
    }

    pub fn stats(&self) -> ReadStats {
        self.stats
    }

    /// Takes the malformed lines recorded since the last call.
    pub fn drain_malformed(&mut self) -> Vec<MalformedLine> {
        std::mem::take(&mut self.malformed)
    }
}

impl<R: BufRead> Iterator for DocumentReader<R> {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Self::Item> {
        while !self.done {
            self.buf.clear();
            match self.reader.read_until(b'\n', &mut self.buf) {
                Ok(0) => {
                    self.done = true;
                    return None;
                }
                Ok(_) => {}
                Err(e) => {
                    self.done = true;
                    return Some(Err(Error::io(&self.path, e)));
                }
            }
            self.line_no += 1;
            if self.buf.last() == Some(&b'\n') {
                self.buf.pop();
            }
            let raw = match String::from_utf8(std::mem::take(&mut self.buf)) {
                Ok(s) => s,
                Err(e) => {
                    self.stats.repaired += 1;
                    String::from_utf8_lossy(e.as_bytes()).into_owned()
                }
            };
            if raw.trim().is_empty() {
                self.stats.blank += 1;
                continue;
            }
            self.stats.lines += 1;
            match parse_document(&raw, &self.file_name, self.line_no) {
                Ok(doc) => {
                    self.stats.documents += 1;
                    return Some(Ok(Record {
                        doc,
                        raw,
                        line: self.line_no,
                    }));
                }
                Err(message) => {
                    self.stats.malformed += 1;
                    match self.mode {
                        OnError::Skip => self.malformed.push(MalformedLine {
                            path: self.path.clone(),
                            line: self.line_no,
                            message,
                        }),
                        OnError::Abort => {
                            self.done = true;
                            return Some(Err(Error::Malformed {
                                path: self.path.clone(),
                                line: self.line_no,
                                message,
                            }));
                        }
                    }
                }
            }
        }
        None
    }
}

/// Opens `path` and streams its documents.
pub fn read_documents(
    path: impl AsRef<Path>,
    on_error: OnError,
) -> Result<DocumentReader<BufReader<File>>> {
    DocumentReader::open(path, on_error)
}

fn parse_document(raw: &str, file_name: &str, line: usize) -> std::result::Result<Document, String> {
    let value: Value = serde_json::from_str(raw).map_err(|e| e.to_string())?;
    let Value::Object(obj) = value else {
        return Err("expected a JSON object".into());
    };
    let text = match obj.get("text") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err("\"text\" is not a string".into()),
        None => return Err("missing \"text\" field".into()),
    };
    let id = match obj.get("id") {
        None | Some(Value::Null) => format!("{file_name}:{line}"),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        Some(_) => return Err("\"id\" must be a string or number".into()),
    };
    let lang = match obj.get("lang") {
        None | Some(Value::Null) => UNDETERMINED_LANG.to_string(),
        Some(Value::String(s)) if is_valid_lang(s) => s.clone(),
        Some(Value::String(s)) => return Err(format!("invalid language code {s:?}")),
        Some(_) => return Err("\"lang\" is not a string".into()),
    };
    let source = match obj.get("source") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(_) => return Err("\"source\" is not a string".into()),
    };
    Ok(Document {
        id,
        lang,
        text,
        source,
    })
}

/// Adds the `dcad_*` annotation fields to a JSON object line.
pub fn annotate_line(raw: &str, features: &FeatureVector, score: f64, label: Label) -> Result<String> {
    let mut obj: Map<String, Value> = serde_json::from_str(raw)
        .map_err(|e| Error::invalid(format!("cannot annotate non-object line: {e}")))?;
    let feats: Vec<Value> = features.to_array().iter().map(|&v| json_number(v)).collect();
    obj.insert("dcad_features".into(), Value::Array(feats));
    obj.insert("dcad_score".into(), json_number(score));
    obj.insert("dcad_label".into(), Value::from(label.as_i8()));
    serde_json::to_string(&obj).map_err(|e| Error::invalid(e.to_string()))
}

fn json_number(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

/// Exclusive writer for a keep file and a remove file.
pub struct PartitionWriter {
    keep: BufWriter<File>,
    remove: BufWriter<File>,
    keep_path: PathBuf,
    remove_path: PathBuf,
    annotate: bool,
    kept: u64,
    removed: u64,
    line: String,
}

impl PartitionWriter {
    pub fn create(keep_path: impl AsRef<Path>, remove_path: impl AsRef<Path>, annotate: bool) -> Result<Self> {
        let keep_path = keep_path.as_ref().to_path_buf();
        let remove_path = remove_path.as_ref().to_path_buf();
        let open = |p: &Path| -> Result<BufWriter<File>> {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            }
            File::create(p).map(BufWriter::new).map_err(|e| Error::io(p, e))
        };
        Ok(PartitionWriter {
            keep: open(&keep_path)?,
            remove: open(&remove_path)?,
            keep_path,
            remove_path,
            annotate,
            kept: 0,
            removed: 0,
            line: String::new(),
        })
    }

    /// Routes one record. The full line is assembled before any byte is
    /// written.
    pub fn write(&mut self, raw: &str, label: Label, features: &FeatureVector, score: f64) -> Result<()> {
        self.line.clear();
        if self.annotate {
            self.line.push_str(&annotate_line(raw, features, score, label)?);
        } else {
            self.line.push_str(raw);
        }
        self.line.push('\n');
        let (out, path, count) = match label {
            Label::Keep => (&mut self.keep, &self.keep_path, &mut self.kept),
            Label::Remove => (&mut self.remove, &self.remove_path, &mut self.removed),
        };
        out.write_all(self.line.as_bytes()).map_err(|e| Error::io(path, e))?;
        *count += 1;
        Ok(())
    }

    pub fn counts(&self) -> (u64, u64) {
        (self.kept, self.removed)
    }

    pub fn finish(mut self) -> Result<(u64, u64)> {
        self.keep.flush().map_err(|e| Error::io(&self.keep_path, e))?;
        self.remove.flush().map_err(|e| Error::io(&self.remove_path, e))?;
        Ok((self.kept, self.removed))
    }
}

/// One document to be routed by [`write_partition`].
#[derive(Debug, Clone)]
pub struct Routed {
    pub record: Record,
    pub label: Label,
    pub features: FeatureVector,
    pub score: f64,
}

/// Writes every item to the keep or remove file according to its label,
/// preserving arrival order. Returns `(kept, removed)`.
pub fn write_partition<I>(docs: I, keep_path: impl AsRef<Path>, remove_path: impl AsRef<Path>, annotate: bool) -> Result<(u64, u64)>
where
    I: IntoIterator<Item = Routed>,
{
    let mut writer = PartitionWriter::create(keep_path, remove_path, annotate)?;
    for item in docs {
        writer.write(&item.record.raw, item.label, &item.features, item.score)?;
    }
    writer.finish()
}

/// Round-robin distribution of input records over a fixed number of shards.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardManifest {
    pub inputs: Vec<PathBuf>,
    pub shard_count: usize,
    pub counts: Vec<u64>,
}

impl ShardManifest {
    pub fn shard_file_name(index: usize) -> String {
        format!("shard-{index:05}.jsonl")
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

fn for_each_record(inputs: &[PathBuf], mut f: impl FnMut(u64, &[u8]) -> Result<()>) -> Result<()> {
    let mut index = 0u64;
    let mut buf = Vec::new();
    for path in inputs {
        let mut reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
        loop {
            buf.clear();
            let n = reader.read_until(b'\n', &mut buf).map_err(|e| Error::io(path, e))?;
            if n == 0 {
                break;
            }
            if buf.last() == Some(&b'\n') {
                buf.pop();
            }
            if buf.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            f(index, &buf)?;
            index += 1;
        }
    }
    Ok(())
}

/// Plans a round-robin sharding of the non-blank lines of `inputs`.
pub fn shard(inputs: &[PathBuf], n: usize) -> Result<ShardManifest> {
    if n == 0 {
        return Err(Error::invalid("shard count must be at least 1"));
    }
    let mut counts = vec![0u64; n];
    for_each_record(inputs, |i, _| {
        counts[(i % n as u64) as usize] += 1;
        Ok(())
    })?;
    Ok(ShardManifest {
        inputs: inputs.to_vec(),
        shard_count: n,
        counts,
    })
}

/// Shards `inputs` into `out_dir/shard-NNNNN.jsonl` and writes
/// `out_dir/manifest.json`.
pub fn write_shards(inputs: &[PathBuf], n: usize, out_dir: &Path) -> Result<ShardManifest> {
    if n == 0 {
        return Err(Error::invalid("shard count must be at least 1"));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let paths: Vec<PathBuf> = (0..n).map(|i| out_dir.join(ShardManifest::shard_file_name(i))).collect();
    let mut writers = paths
        .iter()
        .map(|p| File::create(p).map(BufWriter::new).map_err(|e| Error::io(p, e)))
        .collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0u64; n];
    for_each_record(inputs, |i, line| {
        let s = (i % n as u64) as usize;
        let w = &mut writers[s];
        w.write_all(line)
            .and_then(|_| w.write_all(b"\n"))
            .map_err(|e| Error::io(&paths[s], e))?;
        counts[s] += 1;
        Ok(())
    })?;
    for (w, p) in writers.iter_mut().zip(&paths) {
        w.flush().map_err(|e| Error::io(p, e))?;
    }
    let manifest = ShardManifest {
        inputs: inputs.to_vec(),
        shard_count: n,
        counts,
    };
    let mpath = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::invalid(e.to_string()))?;
    std::fs::write(&mpath, json + "\n").map_err(|e| Error::io(&mpath, e))?;
    Ok(manifest)
}

/// Reassembles the original record order from shard files by taking one
/// line from each shard in turn.
pub fn merge_shards(shard_paths: &[PathBuf]) -> Result<Vec<String>> {
    let mut shards = Vec::with_capacity(shard_paths.len());
    for p in shard_paths {
        let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        shards.push(text.lines().map(str::to_owned).collect::<Vec<_>>().into_iter());
    }
    let mut out = Vec::new();
    'outer: loop {
        for s in shards.iter_mut() {
            match s.next() {
                Some(line) => out.push(line),
                None => break 'outer,
            }
        }
    }
    Ok(out)
}
