//! Little-endian model file.
//!
//! ```text
//! "PSTN"  version:u16  param_count:u32
//! d:u16  gate_hidden:u16  film_hidden:u16  expert_hidden:u16
//! feature mean [7]f64  feature scale [7]f64  target mean f64  target scale f64
//! c_mu f64  kappa f64  c_k f64  g f64
//! params [param_count]f32
//! crc32 of everything above: u32
//! ```

use std::path::Path;

use super::{Dims, Layout, PstnetModel, TargetStats};
use crate::atmos::{NormStats, FEATURE_COUNT};
use crate::error::{Error, Result};
use crate::mophys::PhysicsConstants;

pub const MAGIC: &[u8; 4] = b"PSTN";
pub const FORMAT_VERSION: u16 = 1;

const HEADER_LEN: usize = 4 + 2 + 4 + 4 * 2;
const STATS_LEN: usize = (2 * FEATURE_COUNT + 2) * 8;
const CONSTANTS_LEN: usize = 4 * 8;

pub(super) fn serialized_len(param_count: usize) -> usize {
    HEADER_LEN + STATS_LEN + CONSTANTS_LEN + 4 * param_count + 4
}

pub(super) fn encode(m: &PstnetModel) -> Vec<u8> {
    let dims = m.dims();
    let mut out = Vec::with_capacity(serialized_len(m.params.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.params.len() as u32).to_le_bytes());
    for v in [dims.d, dims.gate_hidden, dims.film_hidden, dims.expert_hidden] {
        out.extend_from_slice(&(v as u16).to_le_bytes());
    }
    let stats = m.norm.mean.iter().chain(&m.norm.scale).chain([&m.target.mean, &m.target.scale]);
    let c = &m.constants;
    for v in stats.chain([&c.c_mu, &c.kappa, &c.c_k, &c.g]) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for p in &m.params {
        out.extend_from_slice(&(*p as f32).to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let s = self
            .buf
            .get(self.at..self.at + N)
            .ok_or_else(|| Error::Corrupt("model file truncated".into()))?;
        self.at += N;
        Ok(s.try_into().expect("length checked"))
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take()?))
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }
    fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take()?))
    }
}

/// Decodes a model. A wrong magic is reported as corruption, a damaged or
/// truncated body as a checksum failure, and an unknown version as such.
pub(super) fn decode(bytes: &[u8]) -> Result<PstnetModel> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::Corrupt("not a model file (bad magic)".into()));
    }
    if bytes.len() < HEADER_LEN + 4 {
        return Err(Error::Corrupt("model file truncated".into()));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }

    let mut r = Reader { buf: body, at: 4 };
    let version = r.u16()?;
    if version != FORMAT_VERSION {
        return Err(Error::Version { found: version, expected: FORMAT_VERSION });
    }
    let count = r.u32()? as usize;
    let d = r.u16()? as usize;
    let gate_hidden = r.u16()? as usize;
    let film_hidden = r.u16()? as usize;
    let expert_hidden = r.u16()? as usize;
    let dims = Dims { gate_hidden, expert_hidden, d, film_hidden };
    if [d, gate_hidden, film_hidden, expert_hidden].contains(&0) {
        return Err(Error::Corrupt("zero layer width".into()));
    }
    let layout = Layout::new(dims);
    if layout.total != count {
        return Err(Error::Corrupt(format!("param count {count} does not match widths ({})", layout.total)));
    }
    if body.len() != serialized_len(count) - 4 {
        return Err(Error::Corrupt("model file length does not match header".into()));
    }

    let mut norm = NormStats::default();
    for v in norm.mean.iter_mut().chain(norm.scale.iter_mut()) {
        *v = r.f64()?;
    }
    let target = TargetStats { mean: r.f64()?, scale: r.f64()? };
    let constants = PhysicsConstants { c_mu: r.f64()?, kappa: r.f64()?, c_k: r.f64()?, g: r.f64()? };
    norm.validate().map_err(|_| Error::Corrupt("invalid normalisation statistics".into()))?;
    if !(target.scale > 0.0 && target.scale.is_finite() && target.mean.is_finite()) {
        return Err(Error::Corrupt("invalid target statistics".into()));
    }
    if constants != PhysicsConstants::default() {
        return Err(Error::Corrupt("model physics constants differ from this build".into()));
    }
    let params = (0..count).map(|_| r.f32().map(f64::from)).collect::<Result<Vec<_>>>()?;
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::Corrupt("non-finite parameter".into()));
    }
    PstnetModel::from_parts(dims, params, norm, target, constants)
}

pub(super) fn save(m: &PstnetModel, path: &Path) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, encode(m))?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub(super) fn load(path: &Path) -> Result<PstnetModel> {
    decode(&std::fs::read(path)?)
}
