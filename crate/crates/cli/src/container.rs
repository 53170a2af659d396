//! Tensor container: `N` modalities of `T × D` float64 samples plus named
//! ground-truth sections.
//!
//! Little-endian throughout.
//!
//! ```text
//! magic        8 bytes  "DMCCATNS"
//! version      u32      1
//! t            u64      samples
//! d            u64      features
//! n            u64      modalities
//! dtype        u8       1 = float64
//! payload      n*t*d f64, modality-major, then sample, then feature
//! n_sections   u32
//! per section:
//!   name_len   u64, then UTF-8 name
//!   kind       u8       0 = matrix, 1 = labels, 2 = text
//!   matrix:    rows u64, cols u64, rows*cols f64 row-major
//!   labels:    len u64, len u64 values
//!   text:      len u64, len UTF-8 bytes
//! ```
//! The file must end exactly after the last section.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use dmcca_core::binio::{ByteReader, ByteWriter};
use dmcca_core::linalg::Matrix;
use dmcca_core::mcca::MultimodalDataset;
use dmcca_core::{Error, Result};

use crate::error::{in_file, io_err, CliResult};

pub const MAGIC: &[u8; 8] = b"DMCCATNS";
pub const VERSION: u32 = 1;
const DTYPE_F64: u8 = 1;
const MAX_DIM: u64 = 1 << 32;
const MAX_NAME: u64 = 1 << 12;

/// Conventional section names.
pub const SOURCE_SIGNAL: &str = "source_signal";
pub const LABELS: &str = "labels";
pub const CONCAT: &str = "concat";
pub const METADATA: &str = "metadata";
pub const SAMPLE_INDICES: &str = "sample_indices";

#[derive(Clone, Debug, PartialEq)]
pub enum Section {
    Matrix(Matrix<f64>),
    Labels(Vec<u64>),
    Text(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorContainer {
    pub modalities: Vec<Matrix<f64>>,
    pub sections: Vec<(String, Section)>,
}

impl TensorContainer {
    pub fn new(modalities: Vec<Matrix<f64>>) -> Result<Self> {
        let Some(first) = modalities.first() else {
            return Err(Error::InvalidInput("container needs at least one modality".into()));
        };
        if let Some(l) = modalities.iter().position(|m| m.shape() != first.shape()) {
            return Err(Error::InvalidInput(format!(
                "modality {l} has shape {:?}, expected {:?}",
                modalities[l].shape(),
                first.shape()
            )));
        }
        Ok(Self { modalities, sections: Vec::new() })
    }

    pub fn with_section(mut self, name: &str, section: Section) -> Self {
        self.set_section(name, section);
        self
    }

    /// Replaces an existing section of the same name.
    pub fn set_section(&mut self, name: &str, section: Section) {
        match self.sections.iter_mut().find(|(n, _)| n == name) {
            Some(slot) => slot.1 = section,
            None => self.sections.push((name.to_string(), section)),
        }
    }

    /// `(T, D, N)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        let (t, d) = self.modalities[0].shape();
        (t, d, self.modalities.len())
    }

    pub fn section(&self, name: &str) -> Option<&Section> {
        self.sections.iter().find(|(n, _)| n == name).map(|(_, s)| s)
    }

    pub fn matrix(&self, name: &str) -> Option<&Matrix<f64>> {
        match self.section(name) {
            Some(Section::Matrix(m)) => Some(m),
            _ => None,
        }
    }

    pub fn labels(&self, name: &str) -> Option<&[u64]> {
        match self.section(name) {
            Some(Section::Labels(l)) => Some(l),
            _ => None,
        }
    }

    pub fn text(&self, name: &str) -> Option<&str> {
        match self.section(name) {
            Some(Section::Text(s)) => Some(s),
            _ => None,
        }
    }

    pub fn dataset(&self) -> Result<MultimodalDataset<f64>> {
        MultimodalDataset::new(self.modalities.clone())
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let (t, d, n) = self.dims();
        let mut w = ByteWriter::new(out);
        w.bytes(MAGIC)?;
        w.u32(VERSION)?;
        w.u64(t as u64)?;
        w.u64(d as u64)?;
        w.u64(n as u64)?;
        w.u8(DTYPE_F64)?;
        for m in &self.modalities {
            w.f64_slice(m.as_slice().iter().copied())?;
        }
        w.u32(self.sections.len() as u32)?;
        for (name, section) in &self.sections {
            w.u64(name.len() as u64)?;
            w.bytes(name.as_bytes())?;
            match section {
                Section::Matrix(m) => {
                    w.u8(0)?;
                    w.u64(m.rows() as u64)?;
                    w.u64(m.cols() as u64)?;
                    w.f64_slice(m.as_slice().iter().copied())?;
                }
                Section::Labels(l) => {
                    w.u8(1)?;
                    w.u64(l.len() as u64)?;
                    for &v in l {
                        w.u64(v)?;
                    }
                }
                Section::Text(s) => {
                    w.u8(2)?;
                    w.u64(s.len() as u64)?;
                    w.bytes(s.as_bytes())?;
                }
            }
        }
        w.flush()
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut r = ByteReader::new(input);
        if r.bytes(8)? != MAGIC {
            return Err(Error::Parse { offset: 0, message: "bad magic, not a tensor container".into() });
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::Parse { offset: 8, message: format!("unsupported version {version}") });
        }
        let t = r.len(MAX_DIM, "sample count")?;
        let d = r.len(MAX_DIM, "feature count")?;
        let n = r.len(MAX_DIM, "modality count")?;
        if t == 0 || d == 0 || n == 0 {
            return Err(r.error(format!("dims ({t}, {d}, {n}) must all be positive")));
        }
        let dtype = r.u8()?;
        if dtype != DTYPE_F64 {
            return Err(r.error(format!("unsupported dtype tag {dtype}")));
        }
        let mut modalities = Vec::with_capacity(n);
        for _ in 0..n {
            let data = r.f64_vec(t.checked_mul(d).ok_or_else(|| r.error("payload size overflows"))?)?;
            modalities.push(Matrix::new(t, d, data)?);
        }
        let n_sections = r.u32()?;
        let mut out = Self { modalities, sections: Vec::new() };
        for _ in 0..n_sections {
            let name_len = r.len(MAX_NAME, "section name length")?;
            let name = String::from_utf8(r.bytes(name_len)?).map_err(|_| r.error("section name is not UTF-8"))?;
            let section = match r.u8()? {
                0 => {
                    let rows = r.len(MAX_DIM, "matrix rows")?;
                    let cols = r.len(MAX_DIM, "matrix cols")?;
                    let data = r.f64_vec(rows.checked_mul(cols).ok_or_else(|| r.error("matrix size overflows"))?)?;
                    Section::Matrix(Matrix::new(rows, cols, data)?)
                }
                1 => {
                    let len = r.len(MAX_DIM, "label count")?;
                    Section::Labels((0..len).map(|_| r.u64()).collect::<Result<_>>()?)
                }
                2 => {
                    let len = r.len(MAX_DIM, "text length")?;
                    Section::Text(String::from_utf8(r.bytes(len)?).map_err(|_| r.error("text is not UTF-8"))?)
                }
                kind => return Err(r.error(format!("unknown section kind {kind}"))),
            };
            out.sections.push((name, section));
        }
        r.expect_eof()?;
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let file = File::create(path).map_err(io_err(path))?;
        self.write_to(BufWriter::new(file)).map_err(in_file(path))
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let file = File::open(path).map_err(io_err(path))?;
        Self::read_from(BufReader::new(file)).map_err(in_file(path))
    }
}
