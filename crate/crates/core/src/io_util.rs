use std::io::{ErrorKind, Read};

use crate::error::{Error, Result};

/// Little-endian reader that remembers its byte offset for error reports.
pub(crate) struct ByteReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> ByteReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, offset: 0 }
    }

    pub fn error(&self, message: impl Into<String>) -> Error {
        Error::Format {
            offset: self.offset,
            message: message.into(),
        }
    }

    fn fill(&mut self, buf: &mut [u8], what: &str) -> Result<()> {
        match self.inner.read_exact(buf) {
            Ok(()) => {
                self.offset += buf.len() as u64;
                Ok(())
            }
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => {
                Err(self.error(format!("truncated while reading {what}")))
            }
            Err(e) => Err(e.into()),
        }
    }

    pub fn bytes<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.fill(&mut buf, what)?;
        Ok(buf)
    }

    pub fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.bytes::<1>(what)?[0])
    }

    pub fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes(what)?))
    }

    pub fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes(what)?))
    }

    pub fn f64(&mut self, what: &str) -> Result<f64> {
        let at = self.offset;
        let v = f64::from_le_bytes(self.bytes(what)?);
        if !v.is_finite() {
            return Err(Error::Format {
                offset: at,
                message: format!("non-finite value in {what}"),
            });
        }
        Ok(v)
    }

    pub fn f64_block(&mut self, len: usize, what: &str) -> Result<Vec<f64>> {
        (0..len).map(|_| self.f64(what)).collect()
    }

    pub fn expect_eof(&mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe)? {
            0 => Ok(()),
            _ => Err(self.error("trailing bytes after payload")),
        }
    }
}
