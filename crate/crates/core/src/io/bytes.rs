use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{Quaternion, UnitQuaternion};

use crate::error::{Error, Result};
use crate::geometry::{Pose, Vec3};

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = PathBuf::from(path);
    let name = path
        .file_name()
        .map(|n| format!(".{}.tmp", n.to_string_lossy()))
        .unwrap_or_else(|| ".tmp".into());
    tmp.set_file_name(name);
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

#[derive(Default)]
pub(crate) struct Writer {
    pub buf: Vec<u8>,
}

impl Writer {
    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }
    pub fn pose(&mut self, p: &Pose) {
        for v in p.to_array() {
            self.f32(v as f32);
        }
    }
    pub fn points(&mut self, pts: &[Vec3]) {
        self.u32(pts.len() as u32);
        for p in pts {
            for v in p.iter() {
                self.f32(*v as f32);
            }
        }
    }
}

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], path: &'a Path) -> Self {
        Self { buf, pos: 0, path }
    }

    pub fn pos(&self) -> usize {
        self.pos
    }

    pub fn corrupt(&self, reason: impl Into<String>) -> Error {
        Error::Corrupt {
            path: self.path.to_path_buf(),
            offset: self.pos as u64,
            reason: reason.into(),
        }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.corrupt(format!(
                "unexpected end of file: need {n} bytes, {} left",
                self.buf.len() - self.pos
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn magic(&mut self, m: &[u8; 4]) -> Result<()> {
        let got = self.take(4)?;
        if got != m {
            self.pos -= 4;
            return Err(self.corrupt(format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(got),
                String::from_utf8_lossy(m)
            )));
        }
        Ok(())
    }

    pub fn version(&mut self, expected: u32) -> Result<()> {
        let v = self.u32()?;
        if v != expected {
            self.pos -= 4;
            return Err(self.corrupt(format!("unsupported version {v}, expected {expected}")));
        }
        Ok(())
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    /// A pose stored as seven `f32`. The quaternion is taken as written (no
    /// renormalization) so that re-encoding reproduces the same bytes.
    pub fn pose(&mut self) -> Result<Pose> {
        let start = self.pos;
        let mut v = [0f64; 7];
        for x in &mut v {
            *x = self.f32()? as f64;
        }
        let q = Quaternion::new(v[6], v[3], v[4], v[5]);
        if v.iter().any(|x| !x.is_finite()) || (q.norm() - 1.0).abs() > 1e-3 {
            self.pos = start;
            return Err(self.corrupt("pose is not finite or its quaternion is not unit length"));
        }
        Ok(Pose {
            translation: Vec3::new(v[0], v[1], v[2]),
            rotation: UnitQuaternion::new_unchecked(q),
        })
    }

    pub fn points(&mut self) -> Result<Vec<Vec3>> {
        let n = self.u32()? as usize;
        if (self.buf.len() - self.pos) / 12 < n {
            self.pos -= 4;
            return Err(self.corrupt(format!("point count {n} exceeds remaining file size")));
        }
        let mut pts = Vec::with_capacity(n);
        for _ in 0..n {
            let p = Vec3::new(self.f32()? as f64, self.f32()? as f64, self.f32()? as f64);
            pts.push(p);
        }
        Ok(pts)
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(self.corrupt(format!(
                "{} trailing bytes after the last record",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}
