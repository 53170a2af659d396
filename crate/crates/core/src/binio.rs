//! Little-endian binary primitives with byte-offset tracking for error messages.

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub struct ByteReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> ByteReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, offset: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    pub fn error<S: Into<String>>(&self, message: S) -> Error {
        Error::Parse { offset: self.offset, message: message.into() }
    }

    /// Grows the buffer chunk by chunk so a corrupt length fails at end of
    /// file instead of allocating up front.
    pub fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        const CHUNK: usize = 1 << 20;
        let mut buf = Vec::with_capacity(n.min(CHUNK));
        while buf.len() < n {
            let start = buf.len();
            buf.resize(start + (n - start).min(CHUNK), 0);
            self.fill(&mut buf[start..])?;
        }
        Ok(buf)
    }

    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        let mut read = 0;
        while read < buf.len() {
            match self.inner.read(&mut buf[read..]) {
                Ok(0) => {
                    return Err(Error::Parse {
                        offset: self.offset + read as u64,
                        message: format!("unexpected end of file ({} more bytes expected)", buf.len() - read),
                    })
                }
                Ok(k) => read += k,
                Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.offset += buf.len() as u64;
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8> {
        let mut b = [0u8; 1];
        self.fill(&mut b)?;
        Ok(b[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.fill(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn u32_be(&mut self) -> Result<u32> {
        let mut b = [0u8; 4];
        self.fill(&mut b)?;
        Ok(u32::from_be_bytes(b))
    }

    pub fn u64(&mut self) -> Result<u64> {
        let mut b = [0u8; 8];
        self.fill(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_bits(self.u64()?))
    }

    /// Reads `n` little-endian `f64` values.
    pub fn f64_vec(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.bytes(n.checked_mul(8).ok_or_else(|| self.error("length overflow"))?)?;
        Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    }

    /// A `u64` length that must not exceed `limit`.
    pub fn len(&mut self, limit: u64, what: &str) -> Result<usize> {
        let at = self.offset;
        let v = self.u64()?;
        if v > limit {
            return Err(Error::Parse { offset: at, message: format!("{what} = {v} exceeds limit {limit}") });
        }
        Ok(v as usize)
    }

    /// Succeeds only if the stream is exhausted.
    pub fn expect_eof(&mut self) -> Result<()> {
        let mut b = [0u8; 1];
        match self.inner.read(&mut b)? {
            0 => Ok(()),
            _ => Err(self.error("trailing bytes after end of data")),
        }
    }
}

pub struct ByteWriter<W> {
    inner: W,
}

impl<W: Write> ByteWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn into_inner(self) -> W {
        self.inner
    }

    pub fn bytes(&mut self, b: &[u8]) -> Result<()> {
        Ok(self.inner.write_all(b)?)
    }

    pub fn u8(&mut self, v: u8) -> Result<()> {
        self.bytes(&[v])
    }

    pub fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f64(&mut self, v: f64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f64_slice(&mut self, values: impl IntoIterator<Item = f64>) -> Result<()> {
        let mut buf = Vec::new();
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.bytes(&buf)
    }

    pub fn flush(&mut self) -> Result<()> {
        Ok(self.inner.flush()?)
    }
}
