use rustc_hash::FxHashMap;

use crate::error::{contract, Result};
use crate::geometry::{transform_points, Frame, PointCloud, Pose, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightCell {
    pub height: f64,
    pub variance: f64,
}

/// 2.5D height map fused with one scalar Kalman filter per xy cell, in the
/// world frame implied by the poses it is fed.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationMap {
    pub cell_size: f64,
    pub cells: FxHashMap<[i32; 2], HeightCell>,
}

impl ElevationMap {
    pub fn new(cell_size: f64) -> Self {
        Self {
            cell_size,
            cells: FxHashMap::default(),
        }
    }

    pub fn key(&self, x: f64, y: f64) -> [i32; 2] {
        [(x / self.cell_size).floor() as i32, (y / self.cell_size).floor() as i32]
    }

    /// Scalar Kalman update of one cell with height `z`.
    pub fn fuse(&mut self, key: [i32; 2], z: f64, variance: f64) {
        self.cells
            .entry(key)
            .and_modify(|c| {
                let k = c.variance / (c.variance + variance);
                c.height += k * (z - c.height);
                c.variance *= 1.0 - k;
            })
            .or_insert(HeightCell { height: z, variance });
    }

    /// Fuses a robot-frame measurement taken at `pose`. Each cell receives
    /// the highest point of the scan that falls into it.
    pub fn update(&mut self, measurement: &PointCloud, pose: &Pose, sensor_variance: f64) -> Result<()> {
        if !(sensor_variance > 0.0) {
            return contract("sensor variance must be positive");
        }
        let world = transform_points(pose, measurement, Frame::World);
        let mut tops: FxHashMap<[i32; 2], f64> = FxHashMap::default();
        for p in &world.points {
            let e = tops.entry(self.key(p.x, p.y)).or_insert(f64::NEG_INFINITY);
            *e = e.max(p.z);
        }
        let mut keys: Vec<_> = tops.into_iter().collect();
        keys.sort_by_key(|(k, _)| *k);
        for (k, z) in keys {
            self.fuse(k, z, sensor_variance);
        }
        Ok(())
    }

    pub fn height_at(&self, x: f64, y: f64) -> Option<f64> {
        self.cells.get(&self.key(x, y)).map(|c| c.height)
    }

    /// One world-frame point per cell at its centre and fused height.
    pub fn to_cloud(&self) -> PointCloud {
        let mut keys: Vec<_> = self.cells.keys().copied().collect();
        keys.sort();
        PointCloud::new(
            keys.iter()
                .map(|k| {
                    Vec3::new(
                        (k[0] as f64 + 0.5) * self.cell_size,
                        (k[1] as f64 + 0.5) * self.cell_size,
                        self.cells[k].height,
                    )
                })
                .collect(),
            Frame::World,
        )
    }
}
