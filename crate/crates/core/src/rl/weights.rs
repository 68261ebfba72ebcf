//! Binary parameter files.
//!
//! Layout, all integers `u32` little-endian:
//!
//! ```text
//! magic "SRLW" | version | image_channels | width | layer count
//! per layer:  in_channels | out_channels | kernel | dilation
//! per layer:  weights then biases as f64 little-endian
//! ```

use std::path::Path;

use super::net::{Network, LAYER_NAMES};
use super::real::Real;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"SRLW";
pub const VERSION: u32 = 1;

pub fn to_bytes<T: Real>(net: &Network<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    for v in [VERSION, net.image_channels as u32, net.width as u32, net.layers.len() as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for l in &net.layers {
        for v in [l.in_channels, l.out_channels, l.kernel, l.dilation] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
    }
    for l in &net.layers {
        for v in l.weight.iter().chain(&l.bias) {
            out.extend_from_slice(&v.to_f64().to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Weights(format!(
                "truncated at byte {} (needed {n} more)",
                self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn from_bytes<T: Real>(bytes: &[u8]) -> Result<Network<T>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Weights("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::Weights(format!(
            "unsupported version {version} (expected {VERSION})"
        )));
    }
    let (channels, width, count) = (r.u32()?, r.u32()?, r.u32()?);
    if channels == 0 || width == 0 {
        return Err(Error::Weights("zero channels or width".into()));
    }
    let mut net = Network::<T>::zeros(channels, width);
    if count != LAYER_NAMES.len() {
        return Err(Error::Weights(format!(
            "expected {} layers, found {count}",
            LAYER_NAMES.len()
        )));
    }
    for (name, l) in LAYER_NAMES.iter().zip(&net.layers) {
        let dims = [r.u32()?, r.u32()?, r.u32()?, r.u32()?];
        if dims != [l.in_channels, l.out_channels, l.kernel, l.dilation] {
            return Err(Error::Weights(format!("layer {name} has unexpected shape {dims:?}")));
        }
    }
    for l in &mut net.layers {
        for v in l.weight.iter_mut().chain(l.bias.iter_mut()) {
            *v = T::from_f64(r.f64()?);
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::Weights(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(net)
}

pub fn save_params<T: Real>(net: &Network<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_bytes(net)).map_err(|e| Error::io(path, e))
}

pub fn load_params<T: Real>(path: impl AsRef<Path>) -> Result<Network<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
