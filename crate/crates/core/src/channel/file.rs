//! Dataset container. Little-endian throughout:
//!
//! | size | field |
//! |-----:|-------|
//! | 4 | magic `RFDS` |
//! | 2 | format version (`1`) |
//! | 2 | byte-order mark `0xFEFF` |
//! | 3 | arithmetic tag, Q total bits, Q fractional bits (as in the weights file) |
//! | 4 | length `C` of the channel configuration |
//! | C | channel configuration, UTF-8 TOML |
//! | 8 | frame count `N` |
//! | 4 | window length `L` |
//! | 4 * N * L | windows, binary32 |
//! | N | labels, one byte each |

use std::fs;
use std::path::Path;

use super::{ChannelConfig, Dataset};
use crate::error::{Error, Result};
use crate::nn::weights_file::{arithmetic_from_tag, arithmetic_tag};
use crate::numerics::Arithmetic;

pub const MAGIC: &[u8; 4] = b"RFDS";
pub const VERSION: u16 = 1;

pub fn encode(ds: &Dataset, arithmetic: Arithmetic) -> Result<Vec<u8>> {
    let config = toml::to_string(&ds.config).map_err(|e| Error::format(e.to_string()))?;
    let mut out = Vec::with_capacity(32 + config.len() + ds.samples().len() * 4 + ds.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&0xFEFFu16.to_le_bytes());
    let (tag, total, frac) = arithmetic_tag(arithmetic);
    out.extend_from_slice(&[tag, total, frac]);
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(config.as_bytes());
    out.extend_from_slice(&(ds.len() as u64).to_le_bytes());
    out.extend_from_slice(&(ds.window_len() as u32).to_le_bytes());
    for v in ds.samples() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend_from_slice(ds.labels());
    Ok(out)
}

fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8]> {
    let end = pos
        .checked_add(n)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::format(format!("truncated dataset at byte {pos}")))?;
    let s = &bytes[*pos..end];
    *pos = end;
    Ok(s)
}

pub fn decode(bytes: &[u8]) -> Result<(Dataset, Arithmetic)> {
    let mut pos = 0;
    if take(bytes, &mut pos, 4)? != MAGIC {
        return Err(Error::format("not a dataset file (bad magic)"));
    }
    let version = u16::from_le_bytes(take(bytes, &mut pos, 2)?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::format(format!("unsupported dataset version {version}")));
    }
    if take(bytes, &mut pos, 2)? != [0xFF, 0xFE] {
        return Err(Error::format("unexpected byte-order mark"));
    }
    let t = take(bytes, &mut pos, 3)?;
    let arithmetic = arithmetic_from_tag(t[0], t[1], t[2])?;
    let clen = u32::from_le_bytes(take(bytes, &mut pos, 4)?.try_into().unwrap()) as usize;
    let text = std::str::from_utf8(take(bytes, &mut pos, clen)?).map_err(|e| Error::format(e.to_string()))?;
    let config: ChannelConfig = toml::from_str(text).map_err(|e| Error::format(e.to_string()))?;
    let n = u64::from_le_bytes(take(bytes, &mut pos, 8)?.try_into().unwrap()) as usize;
    let len = u32::from_le_bytes(take(bytes, &mut pos, 4)?.try_into().unwrap()) as usize;
    let n_samples = n
        .checked_mul(len)
        .filter(|&s| s.checked_mul(4).is_some())
        .ok_or_else(|| Error::format("dataset size overflow"))?;
    let samples = take(bytes, &mut pos, n_samples * 4)?
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let labels = take(bytes, &mut pos, n)?.to_vec();
    if pos != bytes.len() {
        return Err(Error::format(format!(
            "{} trailing bytes after labels",
            bytes.len() - pos
        )));
    }
    let ds = Dataset::new(config, len, samples, labels).map_err(|e| Error::format(e.to_string()))?;
    Ok((ds, arithmetic))
}

pub fn save(path: impl AsRef<Path>, ds: &Dataset, arithmetic: Arithmetic) -> Result<()> {
    fs::write(path, encode(ds, arithmetic)?)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<(Dataset, Arithmetic)> {
    decode(&fs::read(path)?)
}
