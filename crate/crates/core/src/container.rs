//! `DNM1` flat binary tensor container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic  "DNM1"
//! u32    version (1)
//! u32    entry count
//! entry* u32 name length, UTF-8 name,
//!        u8 dtype (1 = f32, 2 = f64),
//!        u32 rank, u32 dims[rank],
//!        raw little-endian values
//! ```
//!
//! Values are stored by bit pattern, so encode/decode is bit-exact.

use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{DType, Scalar, Tensor};

pub const MAGIC: &[u8; 4] = b"DNM1";
pub const VERSION: u32 = 1;
const MAX_RANK: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    F32(Tensor<f32>),
    F64(Tensor<f64>),
}

impl TensorData {
    pub fn dtype(&self) -> DType {
        match self {
            TensorData::F32(_) => DType::F32,
            TensorData::F64(_) => DType::F64,
        }
    }

    pub fn shape(&self) -> &[usize] {
        match self {
            TensorData::F32(t) => t.shape(),
            TensorData::F64(t) => t.shape(),
        }
    }

    fn to_scalar<T: Scalar>(&self) -> Tensor<T> {
        match self {
            TensorData::F32(t) => t.cast(),
            TensorData::F64(t) => t.cast(),
        }
    }
}

/// Ordered list of named tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    entries: Vec<(String, TensorData)>,
}

fn dtype_tag(dtype: DType) -> u8 {
    match dtype {
        DType::F32 => 1,
        DType::F64 => 2,
    }
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    /// Inserts or replaces `name`, keeping the original position on replace.
    pub fn insert(&mut self, name: impl Into<String>, data: TensorData) {
        let name = name.into();
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = data,
            None => self.entries.push((name, data)),
        }
    }

    pub fn insert_tensor<T: Scalar>(&mut self, name: impl Into<String>, tensor: &Tensor<T>) {
        let data = match T::DTYPE {
            DType::F32 => TensorData::F32(tensor.cast()),
            DType::F64 => TensorData::F64(tensor.cast()),
        };
        self.insert(name, data);
    }

    pub fn get(&self, name: &str) -> Option<&TensorData> {
        self.entries.iter().find(|(n, _)| n == name).map(|(_, d)| d)
    }

    /// Fetches `name` converted to `T`, or a format error naming the entry.
    pub fn tensor<T: Scalar>(&self, name: &str) -> Result<Tensor<T>> {
        self.get(name)
            .map(TensorData::to_scalar)
            .ok_or_else(|| Error::format(name, "missing entry"))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, data) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.push(dtype_tag(data.dtype()));
            let shape = data.shape();
            out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
            for &d in shape {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
            match data {
                TensorData::F32(t) => t.data().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
                TensorData::F64(t) => t.data().iter().for_each(|v| out.extend_from_slice(&v.to_le_bytes())),
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "header")? != MAGIC {
            return Err(Error::format("header", "bad magic"));
        }
        let version = r.u32("version")?;
        if version != VERSION {
            return Err(Error::format("version", format!("unsupported version {version}")));
        }
        let count = r.u32("entry count")? as usize;
        let mut container = Container::new();
        for index in 0..count {
            let field = format!("entry {index}");
            let name_len = r.u32(&field)? as usize;
            let name = std::str::from_utf8(r.take(name_len, &field)?)
                .map_err(|_| Error::format(&field, "name is not UTF-8"))?
                .to_owned();
            if container.get(&name).is_some() {
                return Err(Error::format(&name, "duplicate entry"));
            }
            let tag = r.take(1, &name)?[0];
            let rank = r.u32(&name)? as usize;
            if rank > MAX_RANK {
                return Err(Error::format(&name, format!("rank {rank} exceeds {MAX_RANK}")));
            }
            let mut shape = Vec::with_capacity(rank);
            for _ in 0..rank {
                shape.push(r.u32(&name)? as usize);
            }
            let numel = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| Error::format(&name, "element count overflows"))?;
            let data = match tag {
                1 => {
                    let raw = r.take(numel.checked_mul(4).ok_or_else(|| Error::format(&name, "size overflows"))?, &name)?;
                    let values = raw
                        .chunks_exact(4)
                        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                        .collect();
                    TensorData::F32(Tensor::from_vec(&shape, values)?)
                }
                2 => {
                    let raw = r.take(numel.checked_mul(8).ok_or_else(|| Error::format(&name, "size overflows"))?, &name)?;
                    let values = raw
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect();
                    TensorData::F64(Tensor::from_vec(&shape, values)?)
                }
                other => return Err(Error::format(&name, format!("unknown dtype tag {other}"))),
            };
            container.entries.push((name, data));
        }
        if r.pos != bytes.len() {
            return Err(Error::format("trailer", format!("{} unexpected trailing bytes", bytes.len() - r.pos)));
        }
        Ok(container)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::decode(&bytes)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, field: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format(field, "truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, field: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, field)?.try_into().unwrap()))
    }
}
