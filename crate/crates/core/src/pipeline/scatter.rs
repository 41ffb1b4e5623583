//! CSV of feature vectors, scores and labels for external plotting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::anomaly::Label;
use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub const SCATTER_HEADER: &str = "n_words,r_char_rep,r_word_rep,r_special,r_stop,r_flag,s_lid,s_ppl,score,label";

pub struct ScatterWriter {
    out: BufWriter<File>,
    path: PathBuf,
    rows: usize,
}

impl ScatterWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{SCATTER_HEADER}").map_err(|e| Error::io(&path, e))?;
        Ok(ScatterWriter { out, path, rows: 0 })
    }

    /// Values use the shortest representation that parses back exactly.
    pub fn write_row(&mut self, x: &FeatureVector, score: f64, label: Label) -> Result<()> {
        let mut line = String::with_capacity(128);
        for v in x.to_array() {
            line.push_str(&v.to_string());
            line.push(',');
        }
        line.push_str(&score.to_string());
        line.push(',');
        line.push_str(&label.to_string());
        line.push('\n');
        self.out.write_all(line.as_bytes()).map_err(|e| Error::io(&self.path, e))?;
        self.rows += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<usize> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))?;
        Ok(self.rows)
    }
}

/// Writes one row per document and returns the number of rows.
pub fn export_scatter(features: &[FeatureVector], scores: &[f64], labels: &[Label], path: impl AsRef<Path>) -> Result<usize> {
    if features.len() != scores.len() || features.len() != labels.len() {
        return Err(Error::invalid(format!(
            "scatter inputs differ in length: {} features, {} scores, {} labels",
            features.len(),
            scores.len(),
            labels.len()
        )));
    }
    let mut w = ScatterWriter::create(path)?;
    for ((x, &s), &l) in features.iter().zip(scores).zip(labels) {
        w.write_row(x, s, l)?;
    }
    w.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_documents() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let xs: Vec<FeatureVector> = (0..3)
            .map(|i| FeatureVector::from_array([i as f64, 0.1, 1.0 / 3.0, 0.0, 0.25, 0.0, 0.999, 123.456_789_012_345]))
            .collect();
        let labels = [Label::Keep, Label::Remove, Label::Keep];
        let n = export_scatter(&xs, &[0.4, 0.7, 0.5], &labels, &path).unwrap();
        assert_eq!(n, 3);
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], SCATTER_HEADER);
        for (line, x) in lines[1..].iter().zip(&xs) {
            let cells: Vec<&str> = line.split(',').collect();
            assert!(cells[9] == "1" || cells[9] == "-1");
            for (c, v) in cells[..8].iter().zip(x.to_array()) {
                assert!((c.parse::<f64>().unwrap() - v).abs() <= 1e-9);
            }
        }
        assert!(export_scatter(&xs, &[0.1], &labels, &path).is_err());
    }
}
