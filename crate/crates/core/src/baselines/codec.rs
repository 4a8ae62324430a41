//! Shared little-endian container for baseline model files:
//! magic, version u16, body, CRC-32 trailer over everything before it.

use std::path::Path;

use crate::atmos::NormStats;
use crate::error::{Error, Result};
use crate::net::TargetStats;

pub(crate) struct Encoder {
    buf: Vec<u8>,
}

impl Encoder {
    pub fn new(magic: &[u8; 4], version: u16) -> Self {
        let mut buf = magic.to_vec();
        buf.extend_from_slice(&version.to_le_bytes());
        Self { buf }
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn norm(&mut self, n: &NormStats, t: &TargetStats) {
        for v in n.mean.iter().chain(&n.scale).chain([&t.mean, &t.scale]) {
            self.f64(*v);
        }
    }

    pub fn finish(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.buf);
        self.buf.extend_from_slice(&crc.to_le_bytes());
        self.buf
    }

    pub fn write(self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.finish())?;
        std::fs::rename(tmp, path)?;
        Ok(())
    }
}

pub(crate) struct Decoder<'a> {
    body: &'a [u8],
    at: usize,
}

impl<'a> Decoder<'a> {
    pub fn new(bytes: &'a [u8], magic: &[u8; 4], version: u16) -> Result<Self> {
        if bytes.len() < 10 || &bytes[..4] != magic {
            return Err(Error::Corrupt(format!("expected a {} file", String::from_utf8_lossy(magic))));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::Checksum { stored, computed });
        }
        let found = u16::from_le_bytes([body[4], body[5]]);
        if found != version {
            return Err(Error::Version { found, expected: version });
        }
        Ok(Self { body, at: 6 })
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let s = self.body.get(self.at..self.at + N).ok_or_else(|| Error::Corrupt("file truncated".into()))?;
        self.at += N;
        Ok(s.try_into().expect("length checked"))
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take::<1>()?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    pub fn norm(&mut self) -> Result<(NormStats, TargetStats)> {
        let mut n = NormStats::default();
        for v in n.mean.iter_mut().chain(n.scale.iter_mut()) {
            *v = self.f64()?;
        }
        let t = TargetStats { mean: self.f64()?, scale: self.f64()? };
        n.validate().map_err(|_| Error::Corrupt("invalid normalisation statistics".into()))?;
        Ok((n, t))
    }

    pub fn finish(self) -> Result<()> {
        if self.at == self.body.len() {
            Ok(())
        } else {
            Err(Error::Corrupt("trailing bytes after model body".into()))
        }
    }
}
