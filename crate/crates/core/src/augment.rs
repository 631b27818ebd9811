//! Training-time measurement corruptions, trajectory mirroring and the
//! sparsity-ablation mask.
//!
//! Everything is pure: inputs are never modified and the same seed always
//! yields the same output.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{PointCloud, Pose, Vec3};
use crate::io::FrameRecord;

/// Closed integer range `lo..=hi`.
pub type Count = (u32, u32);

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentConfig {
    pub jitter: Option<f64>,
    /// Tilt bound in degrees.
    pub tilt_deg: Option<f64>,
    pub patch_height: Option<f64>,
    pub patch_prune: bool,
    pub outliers: bool,
    pub pose_jitter: Option<f64>,
    pub patch_radius: (f64, f64),
    pub patch_count: Count,
    pub outlier_clusters: Count,
    pub outlier_points: Count,
    pub outlier_sigma: f64,
    /// Half edge of the robot-centric cube where patches and clusters are placed.
    pub half_extent: f64,
    /// Probability of mirroring a whole trajectory about each of x and y.
    pub mirror_prob: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            jitter: Some(0.05),
            tilt_deg: Some(1.0),
            patch_height: Some(0.05),
            patch_prune: true,
            outliers: true,
            pose_jitter: Some(0.05),
            patch_radius: (0.1, 0.4),
            patch_count: (1, 5),
            outlier_clusters: (1, 5),
            outlier_points: (10, 50),
            outlier_sigma: 0.05,
            half_extent: 1.6,
            mirror_prob: 0.5,
        }
    }
}

impl AugmentConfig {
    /// All corruptions and mirroring switched off.
    pub fn none() -> Self {
        Self {
            jitter: None,
            tilt_deg: None,
            patch_height: None,
            patch_prune: false,
            outliers: false,
            pose_jitter: None,
            mirror_prob: 0.0,
            ..Self::default()
        }
    }
}

/// A vertical cylinder in the robot frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Patch {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Patch {
    pub fn contains(&self, p: &Vec3) -> bool {
        let (dx, dy) = (p.x - self.center[0], p.y - self.center[1]);
        dx * dx + dy * dy <= self.radius * self.radius
    }
}

/// What [`augment_frame`] sampled; exposed so tests can check ranges.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AugmentTrace {
    pub tilt_axis: Option<Vec3>,
    pub tilt_angle: f64,
    pub height_patches: Vec<(Patch, f64)>,
    pub prune_patches: Vec<Patch>,
    /// Centre and point count of each outlier cluster.
    pub clusters: Vec<(Vec3, u32)>,
    pub pose_offset: Vec3,
}

fn sym(rng: &mut ChaCha8Rng, b: f64) -> f64 {
    if b > 0.0 {
        rng.random_range(-b..=b)
    } else {
        0.0
    }
}

fn patches(rng: &mut ChaCha8Rng, cfg: &AugmentConfig) -> Vec<Patch> {
    let n = rng.random_range(cfg.patch_count.0..=cfg.patch_count.1);
    let h = cfg.half_extent;
    (0..n)
        .map(|_| Patch {
            center: [rng.random_range(-h..=h), rng.random_range(-h..=h)],
            radius: rng.random_range(cfg.patch_radius.0..=cfg.patch_radius.1),
        })
        .collect()
}

/// Applies the enabled corruptions to a robot-frame measurement and its
/// pose, in order: point jitter, tilt, patch height change, patch removal,
/// outlier clusters, pose translation jitter.
pub fn augment_frame(
    measurement: &PointCloud,
    pose: &Pose,
    cfg: &AugmentConfig,
    seed: u64,
) -> (PointCloud, Pose) {
    let (c, p, _) = augment_frame_traced(measurement, pose, cfg, seed);
    (c, p)
}

pub fn augment_frame_traced(
    measurement: &PointCloud,
    pose: &Pose,
    cfg: &AugmentConfig,
    seed: u64,
) -> (PointCloud, Pose, AugmentTrace) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = measurement.points.clone();
    let mut trace = AugmentTrace::default();

    if let Some(b) = cfg.jitter {
        for p in &mut pts {
            for v in p.iter_mut() {
                *v += sym(&mut rng, b);
            }
        }
    }

    if let Some(deg) = cfg.tilt_deg {
        let heading = rng.random_range(0.0..std::f64::consts::TAU);
        let axis = Vector3::new(heading.cos(), heading.sin(), 0.0);
        let angle = sym(&mut rng, deg).to_radians();
        let r = UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        for p in &mut pts {
            *p = r * *p;
        }
        trace.tilt_axis = Some(axis);
        trace.tilt_angle = angle;
    }

    if let Some(b) = cfg.patch_height {
        for patch in patches(&mut rng, cfg) {
            let dz = sym(&mut rng, b);
            for p in pts.iter_mut().filter(|p| patch.contains(p)) {
                p.z += dz;
            }
            trace.height_patches.push((patch, dz));
        }
    }

    if cfg.patch_prune {
        let ps = patches(&mut rng, cfg);
        pts.retain(|p| !ps.iter().any(|q| q.contains(p)));
        trace.prune_patches = ps;
    }

    if cfg.outliers {
        let n = rng.random_range(cfg.outlier_clusters.0..=cfg.outlier_clusters.1);
        let h = cfg.half_extent;
        let normal = Normal::new(0.0, cfg.outlier_sigma).expect("sigma is finite");
        for _ in 0..n {
            let center = Vec3::new(
                rng.random_range(-h..=h),
                rng.random_range(-h..=h),
                rng.random_range(-h..=h),
            );
            let m = rng.random_range(cfg.outlier_points.0..=cfg.outlier_points.1);
            for _ in 0..m {
                pts.push(
                    center
                        + Vec3::new(
                            normal.sample(&mut rng),
                            normal.sample(&mut rng),
                            normal.sample(&mut rng),
                        ),
                );
            }
            trace.clusters.push((center, m));
        }
    }

    let mut out_pose = *pose;
    if let Some(b) = cfg.pose_jitter {
        let d = Vec3::new(sym(&mut rng, b), sym(&mut rng, b), sym(&mut rng, b));
        out_pose.translation += d;
        trace.pose_offset = d;
    }

    (PointCloud::new(pts, measurement.frame), out_pose, trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MirrorAxis {
    /// Reflect world x (`x → −x`).
    X,
    /// Reflect world y (`y → −y`).
    Y,
}

/// Draws the mirror axes for one trajectory.
pub fn sample_mirror_axes(cfg: &AugmentConfig, seed: u64) -> Vec<MirrorAxis> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut axes = Vec::new();
    for a in [MirrorAxis::X, MirrorAxis::Y] {
        if rng.random_bool(cfg.mirror_prob.clamp(0.0, 1.0)) {
            axes.push(a);
        }
    }
    axes
}

fn world_reflection(axis: MirrorAxis) -> Matrix3<f64> {
    match axis {
        MirrorAxis::X => Matrix3::from_diagonal(&Vector3::new(-1.0, 1.0, 1.0)),
        MirrorAxis::Y => Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0)),
    }
}

/// Reflects a world-from-robot pose. The robot frame is reflected about its
/// own xz plane so the result stays a proper rotation.
pub fn mirror_pose(pose: &Pose, axis: MirrorAxis) -> Pose {
    let m = world_reflection(axis);
    let d = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
    let r = m * pose.rotation.to_rotation_matrix().into_inner() * d;
    Pose::new(
        m * pose.translation,
        UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r)),
    )
}

fn mirror_robot(cloud: &PointCloud) -> PointCloud {
    PointCloud::new(
        cloud.points.iter().map(|p| Vec3::new(p.x, -p.y, p.z)).collect(),
        cloud.frame,
    )
}

fn mirror_world(cloud: &PointCloud, axis: MirrorAxis) -> PointCloud {
    let m = world_reflection(axis);
    PointCloud::new(cloud.points.iter().map(|p| m * p).collect(), cloud.frame)
}

/// Reflects every frame of a trajectory about each axis in turn: robot-frame
/// measurements, world-frame ground truth and both poses.
pub fn mirror_trajectory(frames: &[FrameRecord], axes: &[MirrorAxis]) -> Vec<FrameRecord> {
    let mut out = frames.to_vec();
    for &axis in axes {
        for f in &mut out {
            f.true_pose = mirror_pose(&f.true_pose, axis);
            f.odom_pose = mirror_pose(&f.odom_pose, axis);
            f.measurement = mirror_robot(&f.measurement);
            f.ground_truth = mirror_world(&f.ground_truth, axis);
        }
    }
    out
}

/// Keeps a uniformly random subset of exactly `⌊(1 − fraction)·N⌋` points,
/// in their original order.
pub fn remove_fraction(cloud: &PointCloud, fraction: f64, seed: u64) -> PointCloud {
    let n = cloud.len();
    let keep = ((1.0 - fraction.clamp(0.0, 1.0)) * n as f64).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, n, keep).into_vec();
    idx.sort_unstable();
    PointCloud::new(idx.iter().map(|&i| cloud.points[i]).collect(), cloud.frame)
}
