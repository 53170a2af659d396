//! Reader for the IDX array format used by the standard handwritten-digit
//! datasets: two zero bytes, a dtype byte, a rank byte, big-endian `u32`
//! dimensions, then big-endian values.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use dmcca_core::binio::ByteReader;
use dmcca_core::{Error, Result};

use crate::error::{in_file, io_err, CliResult};

#[derive(Clone, Debug, PartialEq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    /// Values in file order, converted to `f64` without rescaling.
    pub data: Vec<f64>,
}

impl IdxArray {
    /// Product of all dimensions after the first.
    pub fn item_len(&self) -> usize {
        self.dims[1..].iter().product()
    }
}

fn be_values<R: Read>(r: &mut ByteReader<R>, count: usize, width: usize, decode: fn(&[u8]) -> f64) -> Result<Vec<f64>> {
    let n = count.checked_mul(width).ok_or_else(|| r.error("IDX payload size overflows"))?;
    Ok(r.bytes(n)?.chunks_exact(width).map(decode).collect())
}

pub fn read_idx<R: Read>(input: R) -> Result<IdxArray> {
    let mut r = ByteReader::new(input);
    let magic = r.bytes(4)?;
    if magic[0] != 0 || magic[1] != 0 {
        return Err(Error::Parse { offset: 0, message: "IDX magic must start with two zero bytes".into() });
    }
    let decode: (usize, fn(&[u8]) -> f64) = match magic[2] {
        0x08 => (1, |b| b[0] as f64),
        0x09 => (1, |b| b[0] as i8 as f64),
        0x0B => (2, |b| i16::from_be_bytes([b[0], b[1]]) as f64),
        0x0C => (4, |b| i32::from_be_bytes(b.try_into().unwrap()) as f64),
        0x0D => (4, |b| f32::from_be_bytes(b.try_into().unwrap()) as f64),
        0x0E => (8, |b| f64::from_be_bytes(b.try_into().unwrap())),
        other => return Err(Error::Parse { offset: 2, message: format!("unknown IDX dtype 0x{other:02X}") }),
    };
    let rank = magic[3] as usize;
    if rank == 0 {
        return Err(Error::Parse { offset: 3, message: "IDX rank must be at least 1".into() });
    }
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        dims.push(r.u32_be()? as usize);
    }
    let count = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| r.error("IDX dims overflow"))?;
    let data = be_values(&mut r, count, decode.0, decode.1)?;
    r.expect_eof()?;
    Ok(IdxArray { dims, data })
}

pub fn load_idx(path: &Path) -> CliResult<IdxArray> {
    let file = File::open(path).map_err(io_err(path))?;
    read_idx(BufReader::new(file)).map_err(in_file(path))
}
