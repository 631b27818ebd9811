//! Synthetic scenes, trajectories, depth cameras and ground truth.

mod camera;
mod drift;
mod sampling;
mod scene;
mod trajectory;

pub use camera::{
    default_cameras, mount_pose, raycast_depth, render_measurement, render_measurement_robot,
    CameraModel, CAMERA_PITCH_DEG,
};
pub use drift::{inject_drift, DriftSpec};
pub use sampling::{sample_ground_truth, Region};
pub use scene::{generate_scene, generate_scene_traced, Aabb, Kind, Scene, SceneDraws, SceneParams};
pub use trajectory::{sample_trajectory, SampledTrajectory, TrajectoryParams};

use rayon::prelude::*;

use crate::geometry::{Pose, Vec3};
use crate::io::{FrameRecord, Trajectory};
use crate::seed::derive_seed;
use crate::voxel::{voxelize_world, GridConfig};

/// Everything needed to synthesize one trajectory file.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub scene: SceneParams,
    pub trajectory: TrajectoryParams,
    pub cameras: Vec<CameraModel>,
    pub grid: GridConfig,
    /// Ground-truth surface samples per square metre.
    pub gt_density: f64,
    pub drift: DriftSpec,
    /// World height of the scene's ground plane. Kept off the cell lattice:
    /// a floor lying exactly on cell faces would be assigned to one cell or
    /// the other by floating-point round-off.
    pub floor_height: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scene: SceneParams::default(),
            trajectory: TrajectoryParams::default(),
            cameras: default_cameras(),
            grid: GridConfig::default(),
            gt_density: 2000.0,
            drift: DriftSpec::default(),
            floor_height: 0.025,
        }
    }
}

/// Region covered by the robot-centric grid around `position`.
pub fn grid_region(grid: &GridConfig, position: &Vec3) -> Region {
    let g = grid.centered_on(position);
    Region {
        min: g.origin,
        max: g.origin + Vec3::repeat(g.extent()),
    }
}

/// Random scene, walk, camera casts and dense ground truth for one seed.
pub fn generate_trajectory(cfg: &SimConfig, seed: u64) -> Trajectory {
    let scene = generate_scene(&cfg.scene, derive_seed(&[seed, 0]));
    let walk = sample_trajectory(&scene, &cfg.trajectory, derive_seed(&[seed, 1]));
    if walk.truncated {
        log::debug!("trajectory {seed} truncated at {} poses", walk.poses.len());
    }
    render_trajectory(&scene, &walk.poses, cfg, seed)
}

/// Records a given walk through `scene` (poses in scene coordinates).
/// Measurements are stored in the robot frame, ground truth in the world
/// frame clipped to the grid around the true pose. The scene is placed with
/// its ground plane at `floor_height` and odometry drifts per `cfg.drift`.
pub fn render_trajectory(scene: &Scene, walk: &[Pose], cfg: &SimConfig, seed: u64) -> Trajectory {
    let lift = Vec3::new(0.0, 0.0, cfg.floor_height);
    let poses: Vec<Pose> = walk
        .iter()
        .map(|p| Pose::new(p.translation + lift, p.rotation))
        .collect();
    let odom = inject_drift(&poses, &cfg.drift, derive_seed(&[seed, 2]));
    let frames = walk
        .iter()
        .zip(poses.iter().zip(&odom))
        .enumerate()
        .map(|(t, (local, (pose, odom_pose)))| {
            let mut region = grid_region(&cfg.grid, &pose.translation);
            region.min -= lift;
            region.max -= lift;
            let mut gt = sample_ground_truth(scene, &region, cfg.gt_density, derive_seed(&[seed, 3, t as u64]));
            for p in &mut gt.points {
                *p += lift;
            }
            FrameRecord {
                true_pose: *pose,
                odom_pose: *odom_pose,
                measurement: render_measurement_robot(scene, local, &cfg.cameras),
                ground_truth: gt,
            }
        })
        .collect();
    Trajectory {
        cell_size: cfg.grid.cell_size as f32,
        grid_dim: cfg.grid.dim,
        mounts: cfg.cameras.iter().map(|c| c.mount).collect(),
        frames,
    }
}

/// `count` trajectories generated in parallel; trajectory `i` depends only
/// on `(seed, i)`.
pub fn generate_dataset(cfg: &SimConfig, count: usize, seed: u64) -> Vec<Trajectory> {
    (0..count)
        .into_par_iter()
        .map(|i| generate_trajectory(cfg, derive_seed(&[seed, i as u64])))
        .collect()
}

/// Fraction of occupied ground-truth cells that also hold a measurement,
/// both in the grid around the true pose.
pub fn visibility_fraction(frame: &FrameRecord, grid: &GridConfig) -> Option<f64> {
    let g = grid.centered_on(&frame.true_pose.translation);
    let gt = voxelize_world(&frame.ground_truth, &g, 0);
    if gt.is_empty() {
        return None;
    }
    let meas = crate::geometry::transform_points(
        &frame.true_pose,
        &frame.measurement,
        crate::geometry::Frame::World,
    );
    let m = voxelize_world(&meas, &g, 0);
    let seen = gt.coords().iter().filter(|c| m.index().contains(c)).count();
    Some(seen as f64 / gt.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SimConfig {
        SimConfig {
            trajectory: TrajectoryParams {
                num_steps: 3,
                ..Default::default()
            },
            grid: GridConfig::new(32, 0.1),
            gt_density: 300.0,
            ..Default::default()
        }
    }

    #[test]
    fn trajectory_is_reproducible() {
        let cfg = small();
        assert_eq!(generate_trajectory(&cfg, 5), generate_trajectory(&cfg, 5));
        assert_eq!(generate_dataset(&cfg, 2, 9)[1], generate_dataset(&cfg, 3, 9)[1]);
    }

    #[test]
    fn frames_are_populated() {
        let cfg = small();
        let t = generate_trajectory(&cfg, 1);
        assert_eq!(t.mounts.len(), 4);
        assert!(!t.frames.is_empty());
        for f in &t.frames {
            assert_eq!(f.true_pose, f.odom_pose);
            assert!(!f.measurement.is_empty() && !f.ground_truth.is_empty());
            let r = grid_region(&cfg.grid, &f.true_pose.translation);
            assert!(f.ground_truth.points.iter().all(|p| r.contains(p)));
            let v = visibility_fraction(f, &cfg.grid).unwrap();
            assert!(v > 0.0 && v < 1.0);
        }
    }
}
