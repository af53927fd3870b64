//! Named parameter tensors and the little-endian `ICAW` v1 container.
//!
//! Layout: magic `ICAW`, version `u32 = 1`, tensor count `u32`, then per
//! tensor: name length `u32`, UTF-8 name, ndim `u32`, dims `u32` each, raw
//! `f32` values row-major. Tensors are written in name order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"ICAW";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightStore {
    tensors: BTreeMap<String, Tensor>,
}

impl WeightStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.tensors.contains_key(&name) {
            return Err(Error::Weights(format!("duplicate tensor name `{name}`")));
        }
        self.tensors.insert(name, tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let payload: usize = self.tensors.values().map(|t| t.len() * 4).sum();
        let mut out = Vec::with_capacity(12 + payload + 64 * self.tensors.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
            for &d in t.dims() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            for &v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        let magic = r.take(4, "header")?;
        if magic != MAGIC {
            return Err(Error::Weights(format!(
                "bad magic {:?}, expected \"ICAW\"",
                String::from_utf8_lossy(magic)
            )));
        }
        let version = r.u32("header")?;
        if version != FORMAT_VERSION {
            return Err(Error::Weights(format!(
                "unsupported format version {version}, expected {FORMAT_VERSION}"
            )));
        }
        let count = r.u32("header")?;
        let mut store = WeightStore::new();
        for i in 0..count {
            let ctx = format!("tensor #{i}");
            let name_len = r.u32(&ctx)? as usize;
            let name = std::str::from_utf8(r.take(name_len, &ctx)?)
                .map_err(|_| Error::Weights(format!("{ctx}: name is not UTF-8")))?
                .to_string();
            let ctx = format!("tensor `{name}`");
            let ndim = r.u32(&ctx)? as usize;
            let dims = (0..ndim)
                .map(|_| r.u32(&ctx).map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n: usize = dims.iter().product();
            let raw = r.take(n * 4, &ctx)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            let t = Tensor::new(&dims, data).map_err(|e| Error::Weights(format!("{ctx}: {e}")))?;
            store.insert(name, t)?;
        }
        if r.pos != bytes.len() {
            return Err(Error::Weights(format!(
                "{} trailing bytes after the last tensor",
                bytes.len() - r.pos
            )));
        }
        Ok(store)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, ctx: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Weights(format!(
                "truncated file while reading {ctx} (needed {n} bytes at offset {}, {} left)",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, ctx: &str) -> Result<u32> {
        let b = self.take(4, ctx)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn save_weights(store: &WeightStore, path: &Path) -> Result<()> {
    fs::write(path, store.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_weights(path: &Path) -> Result<WeightStore> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    WeightStore::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> WeightStore {
        let mut s = WeightStore::new();
        s.insert(
            "conv.weight",
            Tensor::from_fn(&[2, 1, 3, 3], |i| i as f32 * 0.1 - 0.7).unwrap(),
        )
        .unwrap();
        s.insert(
            "conv.bias",
            Tensor::vector(&[f32::MIN_POSITIVE, -0.0]).unwrap(),
        )
        .unwrap();
        s
    }

    #[test]
    fn round_trip_is_bitwise() {
        let s = sample();
        let back = WeightStore::from_bytes(&s.to_bytes()).unwrap();
        for ((n1, t1), (n2, t2)) in s.iter().zip(back.iter()) {
            assert_eq!(n1, n2);
            assert_eq!(t1.dims(), t2.dims());
            let a: Vec<u32> = t1.data().iter().map(|v| v.to_bits()).collect();
            let b: Vec<u32> = t2.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn bad_magic() {
        let mut bytes = sample().to_bytes();
        bytes[..4].copy_from_slice(b"WACI");
        let err = WeightStore::from_bytes(&bytes).unwrap_err().to_string();
        assert!(err.contains("magic"), "{err}");
    }

    #[test]
    fn bad_version() {
        let mut bytes = sample().to_bytes();
        bytes[4..8].copy_from_slice(&2u32.to_le_bytes());
        let err = WeightStore::from_bytes(&bytes).unwrap_err().to_string();
        assert!(err.contains("version 2"), "{err}");
    }

    #[test]
    fn truncation_names_tensor() {
        let bytes = sample().to_bytes();
        let cut = &bytes[..bytes.len() - 5];
        let err = WeightStore::from_bytes(cut).unwrap_err().to_string();
        assert!(
            err.contains("truncated") && err.contains("conv.weight"),
            "{err}"
        );
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = sample();
        assert!(s.insert("conv.bias", Tensor::zeros(&[1]).unwrap()).is_err());
    }
}
