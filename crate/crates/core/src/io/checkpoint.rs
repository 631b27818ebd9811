use std::path::Path;

use sha2::{Digest, Sha256};

use super::bytes::{read_file, write_atomic, Reader, Writer};
use crate::error::Result;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"TCKP";
const VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub dims: Vec<u32>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, dims: Vec<u32>, data: Vec<f32>) -> Self {
        Self {
            name: name.into(),
            dims,
            data,
        }
    }

    pub fn vector(name: impl Into<String>, data: Vec<f32>) -> Self {
        let n = data.len() as u32;
        Self::new(name, vec![n], data)
    }
}

/// An ordered list of named `f32` tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn get(&self, name: &str) -> Option<&NamedTensor> {
        self.tensors.iter().find(|t| t.name == name)
    }
}

fn content_hash(bytes: &[u8]) -> u64 {
    let d = Sha256::digest(bytes);
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Layout: magic, u32 version, u32 tensor count; per tensor u16 name length,
/// UTF-8 name, u8 dtype (0 = f32), u8 ndim, ndim × u32 dims, row-major
/// payload; then a u64 hash (first 8 bytes of SHA-256 over everything before
/// it, little-endian).
pub fn encode_checkpoint(c: &Checkpoint) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(CHECKPOINT_MAGIC);
    w.u32(VERSION);
    w.u32(c.tensors.len() as u32);
    for t in &c.tensors {
        w.u16(t.name.len() as u16);
        w.bytes(t.name.as_bytes());
        w.u8(DTYPE_F32);
        w.u8(t.dims.len() as u8);
        for &d in &t.dims {
            w.u32(d);
        }
        for &v in &t.data {
            w.f32(v);
        }
    }
    let h = content_hash(&w.buf);
    w.u64(h);
    w.buf
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<Checkpoint> {
    let mut r = Reader::new(bytes, path);
    if bytes.len() < 8 {
        return Err(r.corrupt("file too short for a checkpoint"));
    }
    r.magic(CHECKPOINT_MAGIC)?;
    r.version(VERSION)?;
    let n = r.u32()? as usize;
    let mut tensors = Vec::with_capacity(n.min(4096));
    for _ in 0..n {
        let len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| r.corrupt("tensor name is not UTF-8"))?
            .to_string();
        let dtype = r.u8()?;
        if dtype != DTYPE_F32 {
            return Err(r.corrupt(format!("unsupported dtype {dtype} for `{name}`")));
        }
        let ndim = r.u8()? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(r.u32()?);
        }
        let count = dims.iter().try_fold(1usize, |a, &d| a.checked_mul(d as usize));
        let count = match count {
            Some(c) if c.checked_mul(4).is_some_and(|b| b <= bytes.len() - r.pos()) => c,
            _ => return Err(r.corrupt(format!("payload of `{name}` exceeds file size"))),
        };
        let mut data = Vec::with_capacity(count);
        for _ in 0..count {
            data.push(r.f32()?);
        }
        tensors.push(NamedTensor { name, dims, data });
    }
    let body = r.pos();
    let stored = r.u64()?;
    r.finish()?;
    if stored != content_hash(&bytes[..body]) {
        return Err(crate::error::Error::Corrupt {
            path: path.to_path_buf(),
            offset: body as u64,
            reason: "content hash mismatch".into(),
        });
    }
    Ok(Checkpoint { tensors })
}

pub fn write_checkpoint(path: &Path, c: &Checkpoint) -> Result<()> {
    write_atomic(path, &encode_checkpoint(c))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    decode_checkpoint(&read_file(path)?, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    fn sample() -> Checkpoint {
        Checkpoint {
            tensors: vec![
                NamedTensor::new("a.weight", vec![2, 3], vec![1.0, -2.5, 3.25, 0.0, f32::MIN_POSITIVE, 7.0]),
                NamedTensor::vector("b", vec![0.1]),
            ],
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let bytes = encode_checkpoint(&sample());
        let back = decode_checkpoint(&bytes, Path::new("c")).unwrap();
        assert_eq!(back, sample());
        assert_eq!(encode_checkpoint(&back), bytes);
    }

    #[test]
    fn layout() {
        let bytes = encode_checkpoint(&sample());
        assert_eq!(&bytes[..4], b"TCKP");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(bytes[8..12].try_into().unwrap()), 2);
        assert_eq!(u16::from_le_bytes(bytes[12..14].try_into().unwrap()), 8);
        assert_eq!(&bytes[14..22], b"a.weight");
        assert_eq!(bytes[22], 0);
        assert_eq!(bytes[23], 2);
        let t1 = 2 + 8 + 2 + 8 + 24;
        let t2 = 2 + 1 + 2 + 4 + 4;
        assert_eq!(bytes.len(), 12 + t1 + t2 + 8);
    }

    #[test]
    fn flipped_byte_is_detected() {
        let mut bytes = encode_checkpoint(&sample());
        bytes[30] ^= 1;
        assert!(matches!(
            decode_checkpoint(&bytes, Path::new("c")),
            Err(Error::Corrupt { .. })
        ));
    }
}
