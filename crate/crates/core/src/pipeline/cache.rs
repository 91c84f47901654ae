//! `SLSZ1` dataset cache.
//!
//! Little-endian layout:
//!
//! ```text
//! magic            5 bytes  "SLSZ1"
//! num_channels     u32
//! window_samples   u32
//! num_segments     u64
//! sample_rate_hz   f64
//! labels           num_channels x (u16 length, UTF-8 bytes)
//! data             num_segments x num_channels x window_samples f32, row-major
//! classes          num_segments u8 (0 = other, 1 = pre-ictal)
//! source_times_s   num_segments f64
//! ```

use thiserror::Error;

use super::{Dataset, Label};

pub const CACHE_MAGIC: &[u8; 5] = b"SLSZ1";

#[derive(Debug, Error, PartialEq)]
pub enum CacheError {
    #[error("not a dataset cache (bad magic)")]
    BadMagic,
    #[error("dataset cache truncated at byte {0}")]
    Truncated(usize),
    #[error("corrupt dataset cache: {0}")]
    Corrupt(String),
}

pub fn write_cache(ds: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + ds.data.len() * 4 + ds.len() * 9);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&(ds.num_channels() as u32).to_le_bytes());
    out.extend_from_slice(&(ds.window_samples as u32).to_le_bytes());
    out.extend_from_slice(&(ds.len() as u64).to_le_bytes());
    out.extend_from_slice(&ds.sample_rate_hz.to_le_bytes());
    for label in &ds.channel_labels {
        let b = label.as_bytes();
        let len = b.len().min(u16::MAX as usize);
        out.extend_from_slice(&(len as u16).to_le_bytes());
        out.extend_from_slice(&b[..len]);
    }
    for x in &ds.data {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.extend(ds.labels.iter().map(|&l| l as u8));
    for t in &ds.source_times_s {
        out.extend_from_slice(&t.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CacheError> {
        let end = self.pos.checked_add(n).ok_or(CacheError::Truncated(self.pos))?;
        let s = self.bytes.get(self.pos..end).ok_or(CacheError::Truncated(self.bytes.len()))?;
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], CacheError> {
        Ok(self.take(N)?.try_into().expect("slice length"))
    }
}

pub fn read_cache(bytes: &[u8]) -> Result<Dataset, CacheError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(5).map_err(|_| CacheError::BadMagic)? != CACHE_MAGIC {
        return Err(CacheError::BadMagic);
    }
    let channels = u32::from_le_bytes(r.array()?) as usize;
    let window = u32::from_le_bytes(r.array()?) as usize;
    let n = u64::from_le_bytes(r.array()?) as usize;
    let rate = f64::from_le_bytes(r.array()?);
    if channels == 0 || window == 0 || !(rate > 0.0 && rate.is_finite()) {
        return Err(CacheError::Corrupt("zero channels, zero window or bad sample rate".into()));
    }
    let mut channel_labels = Vec::with_capacity(channels);
    for _ in 0..channels {
        let len = u16::from_le_bytes(r.array()?) as usize;
        let raw = r.take(len)?;
        channel_labels.push(
            String::from_utf8(raw.to_vec()).map_err(|_| CacheError::Corrupt("label is not UTF-8".into()))?,
        );
    }
    let count = n
        .checked_mul(channels)
        .and_then(|v| v.checked_mul(window))
        .ok_or_else(|| CacheError::Corrupt("size overflow".into()))?;
    let raw = r.take(count.checked_mul(4).ok_or(CacheError::Truncated(r.pos))?)?;
    let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    let labels = r
        .take(n)?
        .iter()
        .map(|&b| Label::from_index(b as usize).ok_or_else(|| CacheError::Corrupt(format!("class byte {b}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let source_times_s = r
        .take(n * 8)?
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if r.pos != bytes.len() {
        return Err(CacheError::Corrupt(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(Dataset { channel_labels, sample_rate_hz: rate, window_samples: window, data, labels, source_times_s })
}
