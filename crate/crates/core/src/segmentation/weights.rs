//! Named-tensor container for model parameters.
//!
//! On-disk layout, all integers little-endian:
//!
//! ```text
//! "FLWT" | version: u32 = 1 | entry_count: u32
//! per entry: name_len: u16 | name: UTF-8 | ndim: u8 | dims: u32 * ndim | values: f32 * prod(dims)
//! ```

use std::collections::HashSet;
use std::path::Path;

use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"FLWT";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum WeightError {
    #[error("weight archive format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn format_err(msg: impl Into<String>) -> WeightError {
    WeightError::Format(msg.into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightEntry {
    name: String,
    shape: Vec<usize>,
    values: Vec<f32>,
}

impl WeightEntry {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<f32>) -> Result<Self, WeightError> {
        let name = name.into();
        if name.is_empty() || name.len() > u16::MAX as usize {
            return Err(format_err(format!("invalid entry name length {}", name.len())));
        }
        if shape.len() > u8::MAX as usize || shape.iter().any(|d| *d > u32::MAX as usize) {
            return Err(format_err(format!("shape {shape:?} not representable")));
        }
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(format_err(format!(
                "entry {name}: {} values for shape {shape:?}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(format_err(format!("entry {name} contains non-finite values")));
        }
        Ok(WeightEntry {
            name,
            shape,
            values,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

/// Ordered, uniquely named parameter tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightArchive {
    entries: Vec<WeightEntry>,
}

impl WeightArchive {
    pub fn new(entries: Vec<WeightEntry>) -> Result<Self, WeightError> {
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.name.as_str()) {
                return Err(format_err(format!("duplicate entry name {}", e.name)));
            }
        }
        Ok(WeightArchive { entries })
    }

    pub fn entries(&self) -> &[WeightEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&WeightEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for e in &self.entries {
            out.extend_from_slice(&(e.name.len() as u16).to_le_bytes());
            out.extend_from_slice(e.name.as_bytes());
            out.push(e.shape.len() as u8);
            for d in &e.shape {
                out.extend_from_slice(&(*d as u32).to_le_bytes());
            }
            for v in &e.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, WeightError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(format_err("bad magic"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(format_err(format!("unsupported version {version}")));
        }
        let count = r.u32()? as usize;
        let mut entries = Vec::with_capacity(count.min(4096));
        for _ in 0..count {
            let name_len = r.u16()? as usize;
            let name = std::str::from_utf8(r.take(name_len)?)
                .map_err(|_| format_err("entry name is not UTF-8"))?
                .to_owned();
            let ndim = r.take(1)?[0] as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(r.u32()? as usize);
            }
            let n = shape
                .iter()
                .try_fold(1usize, |acc, d| acc.checked_mul(*d))
                .ok_or_else(|| format_err(format!("entry {name}: shape overflows")))?;
            let raw = r.take(n.checked_mul(4).ok_or_else(|| format_err("entry too large"))?)?;
            let values = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            entries.push(WeightEntry::new(name, shape, values)?);
        }
        if r.pos != bytes.len() {
            return Err(format_err(format!(
                "{} trailing bytes after last entry",
                bytes.len() - r.pos
            )));
        }
        WeightArchive::new(entries)
    }

    pub fn save(&self, path: &Path) -> Result<(), WeightError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, WeightError> {
        WeightArchive::from_bytes(&std::fs::read(path)?)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WeightError> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|e| *e <= self.bytes.len())
            .ok_or_else(|| format_err(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16, WeightError> {
        let b = self.take(2)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self) -> Result<u32, WeightError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}
