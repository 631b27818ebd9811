use std::path::Path;

use super::bytes::{read_file, write_atomic, Reader, Writer};
use crate::error::Result;
use crate::geometry::{Frame, PointCloud, Pose};

pub const ESTIMATES_MAGIC: &[u8; 4] = b"TPCS";
const VERSION: u32 = 1;

/// One reconstructed frame: the odometry pose the grid was centred on and
/// the world-frame estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateFrame {
    pub pose: Pose,
    pub cloud: PointCloud,
}

/// Layout: magic, u32 version, u32 frame count, then per frame a pose
/// (7 × f32) followed by u32 n and n × 3 × f32.
pub fn write_estimates(path: &Path, frames: &[EstimateFrame]) -> Result<()> {
    let mut w = Writer::default();
    w.bytes(ESTIMATES_MAGIC);
    w.u32(VERSION);
    w.u32(frames.len() as u32);
    for f in frames {
        w.pose(&f.pose);
        w.points(&f.cloud.points);
    }
    write_atomic(path, &w.buf)
}

pub fn read_estimates(path: &Path) -> Result<Vec<EstimateFrame>> {
    let bytes = read_file(path)?;
    let mut r = Reader::new(&bytes, path);
    r.magic(ESTIMATES_MAGIC)?;
    r.version(VERSION)?;
    let n = r.u32()? as usize;
    let mut out = Vec::with_capacity(n.min(1 << 16));
    for _ in 0..n {
        let pose = r.pose()?;
        let cloud = PointCloud::new(r.points()?, Frame::World);
        out.push(EstimateFrame { pose, cloud });
    }
    r.finish()?;
    Ok(out)
}
