//! Versioned container shared by checkpoints and corpus caches: a text
//! manifest of `key=value` lines followed by named little-endian `f64`
//! tensors with shape headers.
//!
//! ```text
//! MESHVAE <kind>\n
//! key=value\n ...          (keys sorted)
//! \n
//! u32 tensor count
//! repeated: u32 name length | name | u32 rank | u64 dims[rank] | f64 data
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Tensor { shape, data }
    }

    pub fn vector(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Container {
    pub kind: String,
    pub manifest: BTreeMap<String, String>,
    pub tensors: BTreeMap<String, Tensor>,
}

impl Container {
    pub fn new(kind: &str) -> Self {
        Container {
            kind: kind.to_string(),
            ..Default::default()
        }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        debug_assert!(!value.contains('\n') && !key.contains('='));
        self.manifest.insert(key.to_string(), value);
    }

    pub fn set_list<T: ToString>(&mut self, key: &str, items: &[T]) {
        let joined = items
            .iter()
            .map(|i| i.to_string())
            .collect::<Vec<_>>()
            .join("\t");
        self.set(key, joined);
    }

    pub fn put(&mut self, name: &str, tensor: Tensor) {
        self.tensors.insert(name.to_string(), tensor);
    }

    pub fn get(&self, key: &str, path: &Path) -> Result<&str> {
        self.manifest
            .get(key)
            .map(String::as_str)
            .ok_or_else(|| Error::corrupt(path, format!("missing manifest key `{key}`")))
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str, path: &Path) -> Result<T> {
        let raw = self.get(key, path)?;
        raw.parse()
            .map_err(|_| Error::corrupt(path, format!("bad value for `{key}`: `{raw}`")))
    }

    pub fn parse_list<T: std::str::FromStr>(&self, key: &str, path: &Path) -> Result<Vec<T>> {
        let raw = self.get(key, path)?;
        if raw.is_empty() {
            return Ok(Vec::new());
        }
        raw.split('\t')
            .map(|s| {
                s.parse()
                    .map_err(|_| Error::corrupt(path, format!("bad list item for `{key}`: `{s}`")))
            })
            .collect()
    }

    pub fn tensor(&self, name: &str, path: &Path) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::corrupt(path, format!("missing tensor `{name}`")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(format!("MESHVAE {}\n", self.kind).as_bytes());
        for (k, v) in &self.manifest {
            out.extend_from_slice(format!("{k}={v}\n").as_bytes());
        }
        out.push(b'\n');
        out.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
            for &d in &t.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for &x in &t.data {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let corrupt = |m: &str| Error::corrupt(path, m);
        let mut pos = 0;
        let next_line = |pos: &mut usize| -> Result<&str> {
            let rest = &bytes[*pos..];
            let end = rest
                .iter()
                .position(|&b| b == b'\n')
                .ok_or_else(|| corrupt("unterminated manifest"))?;
            *pos += end + 1;
            std::str::from_utf8(&rest[..end]).map_err(|_| corrupt("manifest is not UTF-8"))
        };
        let header = next_line(&mut pos)?;
        let kind = header
            .strip_prefix("MESHVAE ")
            .ok_or_else(|| corrupt("missing MESHVAE header"))?
            .to_string();
        let mut manifest = BTreeMap::new();
        loop {
            let line = next_line(&mut pos)?;
            if line.is_empty() {
                break;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| corrupt("manifest line without `=`"))?;
            manifest.insert(k.to_string(), v.to_string());
        }

        let mut reader = Reader { bytes, pos };
        let count = reader
            .u32()
            .ok_or_else(|| corrupt("truncated tensor count"))?;
        let mut tensors = BTreeMap::new();
        for _ in 0..count {
            let name_len = reader
                .u32()
                .ok_or_else(|| corrupt("truncated tensor header"))?
                as usize;
            let name = reader
                .take(name_len)
                .and_then(|b| std::str::from_utf8(b).ok())
                .ok_or_else(|| corrupt("bad tensor name"))?
                .to_string();
            let rank = reader
                .u32()
                .ok_or_else(|| corrupt("truncated tensor header"))? as usize;
            if rank > 8 {
                return Err(corrupt("tensor rank too large"));
            }
            let shape: Vec<usize> = (0..rank)
                .map(|_| reader.u64().map(|d| d as usize))
                .collect::<Option<_>>()
                .ok_or_else(|| corrupt("truncated tensor shape"))?;
            let len = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .ok_or_else(|| corrupt("tensor shape overflows"))?;
            let raw = reader
                .take(
                    len.checked_mul(8)
                        .ok_or_else(|| corrupt("tensor too large"))?,
                )
                .ok_or_else(|| corrupt(&format!("truncated data for tensor `{name}`")))?;
            let data = raw
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.insert(name, Tensor { shape, data });
        }
        if reader.pos != bytes.len() {
            return Err(corrupt("trailing bytes after last tensor"));
        }
        Ok(Container {
            kind,
            manifest,
            tensors,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let slice = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(slice)
    }

    fn u32(&mut self) -> Option<u32> {
        self.take(4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
    }

    fn u64(&mut self) -> Option<u64> {
        self.take(8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
    }
}
