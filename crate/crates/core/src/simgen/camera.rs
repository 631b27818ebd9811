use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{UnitQuaternion, Vector3};

use super::scene::Scene;
use crate::geometry::{compose, transform_points, Frame, PointCloud, Pose, Vec3};

/// Pinhole depth camera. The optical axis is the camera's +x, image
/// columns span +y (left) and rows span +z (up).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub hfov_deg: f64,
    pub vfov_deg: f64,
    pub width: u32,
    pub height: u32,
    /// Depth clip along the optical axis.
    pub min_range: f64,
    pub max_range: f64,
    /// Robot-from-camera pose.
    pub mount: Pose,
}

pub const CAMERA_PITCH_DEG: f64 = 30.0;

impl CameraModel {
    pub fn with_mount(mount: Pose) -> Self {
        Self {
            hfov_deg: 87.0,
            vfov_deg: 58.0,
            width: 80,
            height: 60,
            min_range: 0.3,
            max_range: 3.0,
            mount,
        }
    }
}

/// Mount at `offset` looking along heading `yaw`, pitched down by `pitch_deg`.
pub fn mount_pose(offset: Vec3, yaw: f64, pitch_deg: f64) -> Pose {
    let r = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw)
        * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), pitch_deg.to_radians());
    Pose::new(offset, r)
}

/// Front, back, left and right cameras, each pitched 30° down.
pub fn default_cameras() -> Vec<CameraModel> {
    [
        (Vec3::new(0.35, 0.0, 0.0), 0.0),
        (Vec3::new(-0.35, 0.0, 0.0), PI),
        (Vec3::new(0.0, 0.2, 0.0), FRAC_PI_2),
        (Vec3::new(0.0, -0.2, 0.0), -FRAC_PI_2),
    ]
    .into_iter()
    .map(|(o, yaw)| CameraModel::with_mount(mount_pose(o, yaw, CAMERA_PITCH_DEG)))
    .collect()
}

/// One ray per pixel from a camera at world pose `cam_pose`; returns the
/// nearest hits whose depth lies in the clip range, in the world frame.
pub fn raycast_depth(scene: &Scene, cam_pose: &Pose, cam: &CameraModel) -> PointCloud {
    let th = (cam.hfov_deg.to_radians() / 2.0).tan();
    let tv = (cam.vfov_deg.to_radians() / 2.0).tan();
    let origin = cam_pose.translation;
    let mut pts = Vec::new();
    if scene.is_solid(&origin) {
        return PointCloud::new(pts, Frame::World);
    }
    for r in 0..cam.height {
        let v = tv * (1.0 - 2.0 * (r as f64 + 0.5) / cam.height as f64);
        for c in 0..cam.width {
            let u = th * (1.0 - 2.0 * (c as f64 + 0.5) / cam.width as f64);
            // unnormalized so that the ray parameter equals optical depth
            let dir = cam_pose.rotation * Vec3::new(1.0, u, v);
            // surfaces nearer than the clip range still occlude
            if let Some(t) = scene.raycast(&origin, &dir, 0.0) {
                if t >= cam.min_range && t <= cam.max_range {
                    pts.push(origin + dir * t);
                }
            }
        }
    }
    PointCloud::new(pts, Frame::World)
}

/// Union of all camera casts for a robot at world pose `robot`, world frame.
pub fn render_measurement(scene: &Scene, robot: &Pose, cams: &[CameraModel]) -> PointCloud {
    let mut out = PointCloud::empty(Frame::World);
    for cam in cams {
        out.extend(&raycast_depth(scene, &compose(robot, &cam.mount), cam));
    }
    out
}

/// [`render_measurement`] expressed in the robot frame.
pub fn render_measurement_robot(scene: &Scene, robot: &Pose, cams: &[CameraModel]) -> PointCloud {
    let world = render_measurement(scene, robot, cams);
    transform_points(&crate::geometry::inverse(robot), &world, Frame::Robot)
}
