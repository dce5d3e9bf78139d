//! Binary weights container.
//!
//! All integers are little-endian. Layout:
//!
//! | offset | size | field |
//! |-------:|-----:|-------|
//! | 0  | 4 | magic `RFNW` |
//! | 4  | 2 | format version (`1`) |
//! | 6  | 2 | byte-order mark `0xFEFF` (bytes `FF FE`) |
//! | 8  | 1 | kind: 0 = CNN, 1 = BCNN |
//! | 9  | 1 | arithmetic: 0 = real32, 1 = real64, 2 = fixed |
//! | 10 | 1 | Q-format total bits (0 unless fixed) |
//! | 11 | 1 | Q-format fractional bits (0 unless fixed) |
//! | 12 | 4 | input channels |
//! | 16 | 4 | input length |
//! | 20 | 4 | conv layer count `L` |
//! | 24 | 20 * L | per conv layer: out channels, in channels, kernel size, stride, flags (bit 0 = binary), u32 each |
//! | .. | 8 | FC in features, FC classes (u32 each) |
//!
//! The header is followed by binary32 parameter blocks in layer order: for
//! each conv layer its weights `[m][n][f]` then its biases, then the FC
//! weights `[class][feature]` and the FC biases. Nothing may follow.

use std::fs;
use std::path::Path;

use super::layers::{FcLayer, KernelSet};
use super::network::{ConvLayer, NetKind, Network};
use crate::error::{Error, Result};
use crate::numerics::{Arithmetic, QFormat, Scalar};

pub const MAGIC: &[u8; 4] = b"RFNW";
pub const VERSION: u16 = 1;
pub const BYTE_ORDER_MARK: u16 = 0xFEFF;

/// Contents of a weights file: the parameters as binary32 plus the arithmetic
/// the network is meant to be evaluated in.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightsFile {
    pub arithmetic: Arithmetic,
    pub network: Network<f32>,
}

pub(crate) fn arithmetic_tag(a: Arithmetic) -> (u8, u8, u8) {
    match a {
        Arithmetic::Real32 => (0, 0, 0),
        Arithmetic::Real64 => (1, 0, 0),
        Arithmetic::Fixed(q) => (2, q.total_bits(), q.frac_bits()),
    }
}

pub(crate) fn arithmetic_from_tag(tag: u8, total: u8, frac: u8) -> Result<Arithmetic> {
    match tag {
        0 => Ok(Arithmetic::Real32),
        1 => Ok(Arithmetic::Real64),
        2 => Ok(Arithmetic::Fixed(
            QFormat::new(total, frac).map_err(|e| Error::format(e.to_string()))?,
        )),
        other => Err(Error::format(format!("unknown arithmetic tag {other}"))),
    }
}

pub fn encode<T: Scalar>(net: &Network<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&BYTE_ORDER_MARK.to_le_bytes());
    out.push(match net.kind() {
        NetKind::Cnn => 0,
        NetKind::Bcnn => 1,
    });
    let (tag, total, frac) = arithmetic_tag(T::arithmetic());
    out.extend_from_slice(&[tag, total, frac]);
    let put = |out: &mut Vec<u8>, v: usize| out.extend_from_slice(&(v as u32).to_le_bytes());
    put(&mut out, net.input_channels());
    put(&mut out, net.input_length());
    put(&mut out, net.conv_layers().len());
    for layer in net.conv_layers() {
        let k = &layer.kernels;
        put(&mut out, k.out_channels());
        put(&mut out, k.in_channels());
        put(&mut out, k.kernel_size());
        put(&mut out, layer.stride);
        put(&mut out, layer.binary as usize);
    }
    put(&mut out, net.fc().in_features());
    put(&mut out, net.fc().out_classes());

    let mut block = |values: &[T]| {
        for v in values {
            out.extend_from_slice(&v.to_f32().to_le_bytes());
        }
    };
    for layer in net.conv_layers() {
        block(layer.kernels.weights());
        block(layer.kernels.bias());
    }
    block(net.fc().weights());
    block(net.fc().bias());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format(format!("truncated file at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let bytes = self.take(n.checked_mul(4).ok_or_else(|| Error::format("block size overflow"))?)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<WeightsFile> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::format("not a weights file (bad magic)"));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::format(format!("unsupported weights file version {version}")));
    }
    if r.u16()? != BYTE_ORDER_MARK {
        return Err(Error::format("unexpected byte-order mark"));
    }
    let kind = match r.u8()? {
        0 => NetKind::Cnn,
        1 => NetKind::Bcnn,
        other => return Err(Error::format(format!("unknown network kind tag {other}"))),
    };
    let (tag, total, frac) = (r.u8()?, r.u8()?, r.u8()?);
    let arithmetic = arithmetic_from_tag(tag, total, frac)?;
    let input_channels = r.u32()?;
    let input_length = r.u32()?;
    let n_layers = r.u32()?;
    if n_layers > 16 {
        return Err(Error::format(format!("implausible conv layer count {n_layers}")));
    }
    let mut dims = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        dims.push((r.u32()?, r.u32()?, r.u32()?, r.u32()?, r.u32()? & 1 == 1));
    }
    let (fc_in, fc_classes) = (r.u32()?, r.u32()?);

    let bad = |e: Error| Error::format(e.to_string());
    let mut conv = Vec::with_capacity(n_layers);
    for (out_ch, in_ch, ksize, stride, binary) in dims {
        let n = out_ch
            .checked_mul(in_ch)
            .and_then(|v| v.checked_mul(ksize))
            .ok_or_else(|| Error::format("kernel block size overflow"))?;
        let w = r.f32s(n)?;
        let b = r.f32s(out_ch)?;
        conv.push(ConvLayer {
            kernels: KernelSet::new(out_ch, in_ch, ksize, w, b).map_err(bad)?,
            stride,
            binary,
        });
    }
    let n_fc = fc_in
        .checked_mul(fc_classes)
        .ok_or_else(|| Error::format("fc block size overflow"))?;
    let fw = r.f32s(n_fc)?;
    let fb = r.f32s(fc_classes)?;
    let fc = FcLayer::new(fc_in, fc_classes, fw, fb).map_err(bad)?;
    if r.pos != bytes.len() {
        return Err(Error::format(format!(
            "{} trailing bytes after parameter blocks",
            bytes.len() - r.pos
        )));
    }
    let network = Network::new(kind, input_channels, input_length, conv, fc).map_err(bad)?;
    Ok(WeightsFile { arithmetic, network })
}

pub fn save<T: Scalar>(path: impl AsRef<Path>, net: &Network<T>) -> Result<()> {
    fs::write(path, encode(net))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<WeightsFile> {
    decode(&fs::read(path)?)
}
