//! Feature rows of one language, held in memory or spilled to an anonymous
//! temporary file (row-major little-endian `f64`).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use crate::anomaly::Matrix;
use crate::error::{Error, Result};

const SPILL_NAME: &str = "<spill file>";

fn spill_err(e: std::io::Error) -> Error {
    Error::io(SPILL_NAME, e)
}

pub(crate) struct FeatureStore {
    dim: usize,
    rows: usize,
    mem: Vec<f64>,
    file: Option<BufWriter<File>>,
}

impl FeatureStore {
    pub fn new(dim: usize) -> Self {
        FeatureStore {
            dim,
            rows: 0,
            mem: Vec::new(),
            file: None,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn memory_bytes(&self) -> usize {
        self.mem.len() * std::mem::size_of::<f64>()
    }

    pub fn is_spilled(&self) -> bool {
        self.file.is_some()
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        debug_assert_eq!(row.len(), self.dim);
        self.rows += 1;
        match &mut self.file {
            Some(w) => {
                for v in row {
                    w.write_all(&v.to_le_bytes()).map_err(spill_err)?;
                }
            }
            None => self.mem.extend_from_slice(row),
        }
        Ok(())
    }

    /// Moves the in-memory rows to a temporary file; later rows go there too.
    pub fn spill(&mut self, dir: Option<&Path>) -> Result<()> {
        if self.file.is_some() {
            return Ok(());
        }
        let file = match dir {
            Some(d) => tempfile::tempfile_in(d).map_err(|e| Error::io(d, e))?,
            None => tempfile::tempfile().map_err(spill_err)?,
        };
        let mut w = BufWriter::new(file);
        for v in &self.mem {
            w.write_all(&v.to_le_bytes()).map_err(spill_err)?;
        }
        self.mem = Vec::new();
        self.file = Some(w);
        Ok(())
    }

    /// A fresh sequential reader from the first row.
    pub fn reader(&mut self) -> Result<RowReader<'_>> {
        match &mut self.file {
            None => Ok(RowReader::Memory {
                data: &self.mem,
                dim: self.dim,
                next: 0,
            }),
            Some(w) => {
                w.flush().map_err(spill_err)?;
                let mut f = w.get_ref().try_clone().map_err(spill_err)?;
                f.seek(SeekFrom::Start(0)).map_err(spill_err)?;
                Ok(RowReader::File {
                    reader: BufReader::with_capacity(1 << 16, f),
                    left: self.rows,
                    bytes: vec![0; self.dim * 8],
                })
            }
        }
    }

    /// Rows at the given ascending indices.
    pub fn select(&mut self, sorted: &[usize]) -> Result<Matrix<f64>> {
        let dim = self.dim;
        let mut out = Matrix::with_capacity(dim, sorted.len());
        let mut row = vec![0.0; dim];
        let mut reader = self.reader()?;
        let mut at = 0usize;
        for &i in sorted {
            while at <= i {
                if !reader.next_into(&mut row)? {
                    return Err(spill_err(std::io::ErrorKind::UnexpectedEof.into()));
                }
                at += 1;
            }
            out.push_row(&row);
        }
        Ok(out)
    }
}

pub(crate) enum RowReader<'a> {
    Memory { data: &'a [f64], dim: usize, next: usize },
    File { reader: BufReader<File>, left: usize, bytes: Vec<u8> },
}

impl RowReader<'_> {
    /// Copies the next row into `row`; false at the end.
    pub fn next_into(&mut self, row: &mut [f64]) -> Result<bool> {
        match self {
            RowReader::Memory { data, dim, next } => {
                let start = *next * *dim;
                if start >= data.len() {
                    return Ok(false);
                }
                row.copy_from_slice(&data[start..start + *dim]);
                *next += 1;
                Ok(true)
            }
            RowReader::File { reader, left, bytes } => {
                if *left == 0 {
                    return Ok(false);
                }
                reader.read_exact(bytes).map_err(spill_err)?;
                for (v, b) in row.iter_mut().zip(bytes.chunks_exact(8)) {
                    *v = f64::from_le_bytes(b.try_into().expect("8 bytes"));
                }
                *left -= 1;
                Ok(true)
            }
        }
    }

    /// Up to `max_rows` further rows; empty at the end.
    pub fn next_chunk(&mut self, dim: usize, max_rows: usize) -> Result<Matrix<f64>> {
        let mut m = Matrix::with_capacity(dim, max_rows.min(1 << 16));
        let mut row = vec![0.0; dim];
        for _ in 0..max_rows {
            if !self.next_into(&mut row)? {
                break;
            }
            m.push_row(&row);
        }
        Ok(m)
    }
}
