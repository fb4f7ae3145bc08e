//! Binary parameter checkpoints.
//!
//! Layout (little endian):
//!
//! ```text
//! magic "MCNCKPT\0" | version u32 | arch_hash u64 | step u64 | block count u32
//! per block: name len u32 | name utf-8 | ndim u32 | dims u64 * ndim | f64 * prod(dims)
//! ```

use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MCNCKPT\0";
pub const VERSION: u32 = 1;

/// 64-bit FNV-1a, used to fingerprint architecture descriptions.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub arch_hash: u64,
    pub step: u64,
    pub blocks: Vec<Block>,
}

impl Checkpoint {
    pub fn block(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&self.arch_hash.to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        out.extend_from_slice(&(self.blocks.len() as u32).to_le_bytes());
        for b in &self.blocks {
            out.extend_from_slice(&(b.name.len() as u32).to_le_bytes());
            out.extend_from_slice(b.name.as_bytes());
            out.extend_from_slice(&(b.shape.len() as u32).to_le_bytes());
            for &d in &b.shape {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in &b.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(r.err(0, "not a checkpoint file"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.err(8, &format!("unsupported version {version}")));
        }
        let arch_hash = r.u64()?;
        let step = r.u64()?;
        let count = r.u32()? as usize;
        let mut blocks = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let at = r.pos;
            let len = r.u32()? as usize;
            let name = std::str::from_utf8(r.take(len)?)
                .map_err(|_| r.err(at, "block name is not utf-8"))?
                .to_owned();
            let ndim = r.u32()? as usize;
            let shape = (0..ndim)
                .map(|_| r.u64().map(|d| d as usize))
                .collect::<Result<Vec<_>>>()?;
            let n = shape
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| r.err(at, "block size overflows"))?;
            let data = r
                .take(n.checked_mul(8).ok_or_else(|| r.err(at, "block size overflows"))?)?
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            blocks.push(Block { name, shape, data });
        }
        if r.pos != bytes.len() {
            return Err(r.err(r.pos, "trailing bytes"));
        }
        Ok(Self {
            arch_hash,
            step,
            blocks,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.encode()).map_err(|e| Error::io(path, e))
    }

    /// Reads a checkpoint and refuses it unless its hash equals `expected_hash`.
    pub fn load(path: &Path, expected_hash: u64) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let ck = Self::decode(&bytes)?;
        if ck.arch_hash != expected_hash {
            return Err(Error::ArchitectureMismatch {
                expected: expected_hash,
                found: ck.arch_hash,
            });
        }
        Ok(ck)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn err(&self, offset: usize, reason: &str) -> Error {
        Error::Format {
            offset,
            reason: reason.to_owned(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| self.err(self.pos, "unexpected end of checkpoint"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
