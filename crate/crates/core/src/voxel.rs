//! Sub-voxel sparse voxelization.
//!
//! A point cloud in grid units (one unit per cell) becomes a sparse tensor
//! with one coordinate `[⌊x⌋, ⌊y⌋, ⌊z⌋, k]` per occupied cell and the
//! per-cell centroid modulo one as a 3-channel feature. Adding the feature
//! back to the cell index recovers the centroid.

use rustc_hash::FxHashMap;

use crate::error::{contract, Result};
use crate::geometry::{relative_transform, transform_points, Frame, PointCloud, Pose, Vec3};
use crate::sparse::{Coord, CoordIndex, SparseTensor};

/// Largest `f32` strictly below one.
const BELOW_ONE: f32 = 1.0 - f32::EPSILON / 2.0;

/// Voxel discretization of a robot-centric cube.
///
/// The grid is axis-aligned with the world frame; `origin` is the world
/// position of its minimal corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub dim: u32,
    pub cell_size: f64,
    pub origin: Vec3,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self::new(64, 0.05)
    }
}

impl GridConfig {
    pub fn new(dim: u32, cell_size: f64) -> Self {
        assert!(dim > 0 && cell_size > 0.0, "grid needs positive dim and cell size");
        Self {
            dim,
            cell_size,
            origin: Vec3::zeros(),
        }
    }

    /// Edge length of the cube in meters.
    pub fn extent(&self) -> f64 {
        self.dim as f64 * self.cell_size
    }

    /// Same discretization, re-centred on `position` with the origin snapped
    /// to the cell lattice.
    pub fn centered_on(&self, position: &Vec3) -> Self {
        let half = self.extent() / 2.0;
        let snap = |v: f64| ((v - half) / self.cell_size).floor() * self.cell_size;
        Self {
            origin: Vec3::new(snap(position.x), snap(position.y), snap(position.z)),
            ..*self
        }
    }

    /// World-from-grid transform (pure translation).
    pub fn grid_pose(&self) -> Pose {
        Pose::from_translation(self.origin.x, self.origin.y, self.origin.z)
    }

    /// World cloud → grid units.
    pub fn to_grid(&self, cloud: &PointCloud) -> PointCloud {
        PointCloud::new(
            cloud
                .points
                .iter()
                .map(|p| (p - self.origin) / self.cell_size)
                .collect(),
            Frame::Grid,
        )
    }

    pub fn contains_world(&self, p: &Vec3) -> bool {
        let g = (p - self.origin) / self.cell_size;
        let d = self.dim as f64;
        g.iter().all(|&v| (0.0..d).contains(&v))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct VoxelizeStats {
    pub dropped: usize,
}

/// Buckets grid-unit points by floor coordinate and stores the centroid
/// offset of each bucket. Points outside `[0, dim)³` are dropped. Output rows
/// are sorted by coordinate so the result does not depend on point order.
pub fn voxelize(
    cloud: &PointCloud,
    cfg: &GridConfig,
    k: i32,
) -> (SparseTensor<f32>, VoxelizeStats) {
    let dim = cfg.dim as f64;
    let mut buckets: FxHashMap<Coord, ([f64; 3], u32)> = FxHashMap::default();
    let mut dropped = 0;
    for p in &cloud.points {
        if !p.iter().all(|&v| v.is_finite() && (0.0..dim).contains(&v)) {
            dropped += 1;
            continue;
        }
        let key = [
            p.x.floor() as i32,
            p.y.floor() as i32,
            p.z.floor() as i32,
            k,
        ];
        let e = buckets.entry(key).or_insert(([0.0; 3], 0));
        e.0[0] += p.x;
        e.0[1] += p.y;
        e.0[2] += p.z;
        e.1 += 1;
    }
    let mut cells: Vec<(Coord, [f64; 3], u32)> =
        buckets.into_iter().map(|(c, (s, n))| (c, s, n)).collect();
    cells.sort_unstable_by_key(|(c, _, _)| *c);

    let mut index = CoordIndex::with_capacity(cells.len());
    let mut feats = Vec::with_capacity(cells.len() * 3);
    for (c, sum, n) in cells {
        index.insert(c);
        for d in 0..3 {
            let centroid = sum[d] / n as f64;
            let f = (centroid - c[d] as f64) as f32;
            feats.push(f.clamp(0.0, BELOW_ONE));
        }
    }
    (
        SparseTensor::from_parts(index, feats, 3, [1; 4]),
        VoxelizeStats { dropped },
    )
}

/// Voxelizes a world-frame cloud in the grid `cfg`.
pub fn voxelize_world(cloud: &PointCloud, cfg: &GridConfig, k: i32) -> SparseTensor<f32> {
    voxelize(&cfg.to_grid(cloud), cfg, k).0
}

fn check_offsets(t: &SparseTensor<f32>) -> Result<()> {
    if t.channels() != 3 {
        return contract(format!(
            "expected a 3-channel offset tensor, got {} channels",
            t.channels()
        ));
    }
    Ok(())
}

/// Cell index plus feature, in grid units. The temporal index is dropped.
pub fn devoxelize_grid(t: &SparseTensor<f32>) -> Result<PointCloud> {
    check_offsets(t)?;
    let points = t
        .coords()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let f = t.row(i);
            Vec3::new(
                c[0] as f64 + f[0] as f64,
                c[1] as f64 + f[1] as f64,
                c[2] as f64 + f[2] as f64,
            )
        })
        .collect();
    Ok(PointCloud::new(points, Frame::Grid))
}

/// One world-frame point per coordinate at `(coord + feature)·cell + origin`.
pub fn devoxelize(t: &SparseTensor<f32>, cfg: &GridConfig) -> Result<PointCloud> {
    let g = devoxelize_grid(t)?;
    Ok(PointCloud::new(
        g.points
            .iter()
            .map(|p| p * cfg.cell_size + cfg.origin)
            .collect(),
        Frame::World,
    ))
}

fn check_slice(t: &SparseTensor<f32>, k: i32, what: &str) -> Result<()> {
    check_offsets(t)?;
    if t.stride() != [1; 4] {
        return contract(format!("{what} tensor must have stride 1"));
    }
    if let Some(c) = t.coords().iter().find(|c| c[3] != k) {
        return contract(format!("{what} tensor has coordinate {c:?}; expected k = {k}"));
    }
    Ok(())
}

/// Union of the current measurement (`k = 0`) and the re-projected previous
/// estimate (`k = 1`). Spatial collisions stay distinct through `k`.
pub fn temporal_concat(
    measurement: &SparseTensor<f32>,
    previous: &SparseTensor<f32>,
) -> Result<SparseTensor<f32>> {
    check_slice(measurement, 0, "measurement")?;
    check_slice(previous, 1, "previous")?;
    let mut index = measurement.index().clone();
    let mut feats = measurement.features().to_vec();
    for (i, c) in previous.coords().iter().enumerate() {
        index.insert(*c);
        feats.extend_from_slice(previous.row(i));
    }
    Ok(SparseTensor::from_parts(index, feats, 3, [1; 4]))
}

/// Moves the previous estimate from its grid into the current grid and
/// relabels it `k = 1`. Cells leaving the current grid are dropped.
///
/// The pipeline is devoxelize → [`relative_transform`] between the two grid
/// frames → voxelize. When that transform is a whole-cell translation
/// (always the case for lattice-snapped, world-aligned grids) the shift is
/// applied to the integer coordinates directly and features are copied
/// unchanged.
pub fn reproject_previous(
    previous: &SparseTensor<f32>,
    prev_cfg: &GridConfig,
    cur_cfg: &GridConfig,
) -> Result<SparseTensor<f32>> {
    check_offsets(previous)?;
    let rel = relative_transform(&prev_cfg.grid_pose(), &cur_cfg.grid_pose());
    let cells = rel.translation / cur_cfg.cell_size;
    let shift = cells.map(f64::round);
    let lattice_shift = rel.rotation.angle() < 1e-12
        && (cells - shift).amax() < 1e-6
        && (prev_cfg.cell_size - cur_cfg.cell_size).abs() < 1e-12;
    if lattice_shift {
        let (sx, sy, sz) = (shift.x as i32, shift.y as i32, shift.z as i32);
        let dim = cur_cfg.dim as i32;
        let mut rows: Vec<(Coord, usize)> = previous
            .coords()
            .iter()
            .enumerate()
            .filter_map(|(i, c)| {
                let n = [c[0] + sx, c[1] + sy, c[2] + sz, 1];
                n[..3].iter().all(|v| (0..dim).contains(v)).then_some((n, i))
            })
            .collect();
        rows.sort_unstable_by_key(|(c, _)| *c);
        let mut index = CoordIndex::with_capacity(rows.len());
        let mut feats = Vec::with_capacity(rows.len() * 3);
        for (c, i) in rows {
            index.insert(c);
            feats.extend_from_slice(previous.row(i));
        }
        return Ok(SparseTensor::from_parts(index, feats, 3, [1; 4]));
    }
    let local = PointCloud::new(
        devoxelize_grid(previous)?
            .points
            .iter()
            .map(|p| p * prev_cfg.cell_size)
            .collect(),
        Frame::Grid,
    );
    let moved = transform_points(&rel, &local, Frame::Grid);
    let grid_units = PointCloud::new(
        moved.points.iter().map(|p| p / cur_cfg.cell_size).collect(),
        Frame::Grid,
    );
    Ok(voxelize(&grid_units, cur_cfg, 1).0)
}
