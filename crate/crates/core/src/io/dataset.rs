use std::path::Path;

use super::bytes::{read_file, write_atomic, Reader, Writer};
use crate::error::Result;
use crate::geometry::{Frame, PointCloud, Pose};

pub const DATASET_MAGIC: &[u8; 4] = b"TREC";
const VERSION: u32 = 1;

/// One time step of a recorded trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    /// World-from-robot pose from the simulator.
    pub true_pose: Pose,
    /// World-from-robot pose as reported by (possibly drifting) odometry.
    pub odom_pose: Pose,
    /// Camera hits in the robot frame.
    pub measurement: PointCloud,
    /// Dense surface samples in the world frame.
    pub ground_truth: PointCloud,
}

/// A trajectory file: grid settings, camera mounts and frames.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub cell_size: f32,
    pub grid_dim: u32,
    /// Robot-from-camera mount poses.
    pub mounts: Vec<Pose>,
    pub frames: Vec<FrameRecord>,
}

pub fn encode_trajectory(t: &Trajectory) -> Vec<u8> {
    let mut w = Writer::default();
    w.bytes(DATASET_MAGIC);
    w.u32(VERSION);
    w.f32(t.cell_size);
    w.u32(t.grid_dim);
    w.u32(t.frames.len() as u32);
    w.u32(t.mounts.len() as u32);
    for m in &t.mounts {
        w.pose(m);
    }
    for f in &t.frames {
        w.pose(&f.true_pose);
        w.pose(&f.odom_pose);
        w.points(&f.measurement.points);
        w.points(&f.ground_truth.points);
    }
    w.buf
}

pub fn decode_trajectory(bytes: &[u8], path: &Path) -> Result<Trajectory> {
    let mut r = Reader::new(bytes, path);
    r.magic(DATASET_MAGIC)?;
    r.version(VERSION)?;
    let cell_size = r.f32()?;
    if !(cell_size.is_finite() && cell_size > 0.0) {
        return Err(r.corrupt(format!("cell size {cell_size} is not positive")));
    }
    let grid_dim = r.u32()?;
    let num_frames = r.u32()? as usize;
    let num_cameras = r.u32()? as usize;
    let mut mounts = Vec::with_capacity(num_cameras.min(64));
    for _ in 0..num_cameras {
        mounts.push(r.pose()?);
    }
    let mut frames = Vec::with_capacity(num_frames.min(1 << 16));
    for _ in 0..num_frames {
        let true_pose = r.pose()?;
        let odom_pose = r.pose()?;
        let measurement = PointCloud::new(r.points()?, Frame::Robot);
        let ground_truth = PointCloud::new(r.points()?, Frame::World);
        frames.push(FrameRecord {
            true_pose,
            odom_pose,
            measurement,
            ground_truth,
        });
    }
    r.finish()?;
    Ok(Trajectory {
        cell_size,
        grid_dim,
        mounts,
        frames,
    })
}

pub fn write_trajectory(path: &Path, t: &Trajectory) -> Result<()> {
    write_atomic(path, &encode_trajectory(t))
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    decode_trajectory(&read_file(path)?, path)
}
