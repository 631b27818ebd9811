//! Rigid-body poses and point clouds.
//!
//! Conventions: right-handed frames, z up, quaternions written in
//! `(x, y, z, w)` order. A robot [`Pose`] is always stored world-from-robot,
//! i.e. it maps robot-frame coordinates into the world frame.

use nalgebra::{Quaternion, UnitQuaternion, Vector3};

pub type Vec3 = Vector3<f64>;

/// Rigid transform: rotation followed by translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub translation: Vec3,
    pub rotation: UnitQuaternion<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            translation: Vec3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    /// Builds a pose, renormalizing the rotation.
    pub fn new(translation: Vec3, rotation: UnitQuaternion<f64>) -> Self {
        Self {
            translation,
            rotation: renormalize(rotation),
        }
    }

    pub fn from_translation(x: f64, y: f64, z: f64) -> Self {
        Self::new(Vec3::new(x, y, z), UnitQuaternion::identity())
    }

    /// Pose with a pure heading rotation about world z.
    pub fn from_yaw(translation: Vec3, yaw: f64) -> Self {
        Self::new(
            translation,
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
        )
    }

    /// Quaternion components in `(x, y, z, w)` order.
    pub fn quat_xyzw(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.i, q.j, q.k, q.w]
    }

    /// Builds a pose from `(tx, ty, tz, qx, qy, qz, qw)`.
    pub fn from_array(v: [f64; 7]) -> Self {
        let q = Quaternion::new(v[6], v[3], v[4], v[5]);
        Self::new(Vec3::new(v[0], v[1], v[2]), UnitQuaternion::new_normalize(q))
    }

    /// `(tx, ty, tz, qx, qy, qz, qw)`.
    pub fn to_array(&self) -> [f64; 7] {
        let t = self.translation;
        let [qx, qy, qz, qw] = self.quat_xyzw();
        [t.x, t.y, t.z, qx, qy, qz, qw]
    }

    pub fn yaw(&self) -> f64 {
        self.rotation.euler_angles().2
    }

    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }
}

fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(q.into_inner())
}

/// `a ∘ b`: applies `b` first, then `a`.
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    Pose::new(
        a.rotation * b.translation + a.translation,
        a.rotation * b.rotation,
    )
}

pub fn inverse(p: &Pose) -> Pose {
    let r_inv = p.rotation.inverse();
    Pose::new(-(r_inv * p.translation), r_inv)
}

/// Map from the previous robot frame into the current robot frame,
/// `inverse(cur) ∘ prev`, for world-from-robot poses.
pub fn relative_transform(prev_pose: &Pose, cur_pose: &Pose) -> Pose {
    compose(&inverse(cur_pose), prev_pose)
}

/// Coordinate frame a [`PointCloud`] is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Frame {
    #[default]
    World,
    Robot,
    Camera,
    /// Grid units of a robot-centric voxel grid (one unit per cell).
    Grid,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub frame: Frame,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, frame: Frame) -> Self {
        Self { points, frame }
    }

    pub fn empty(frame: Frame) -> Self {
        Self {
            points: Vec::new(),
            frame,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn all_finite(&self) -> bool {
        self.points.iter().all(|p| p.iter().all(|c| c.is_finite()))
    }

    pub fn extend(&mut self, other: &PointCloud) {
        self.points.extend_from_slice(&other.points);
    }
}

/// Maps every point by `p` (rotation, then translation). The frame label is
/// set to `target`.
pub fn transform_points(p: &Pose, cloud: &PointCloud, target: Frame) -> PointCloud {
    PointCloud {
        points: cloud.points.iter().map(|x| p.transform_point(x)).collect(),
        frame: target,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn rz(angle: f64) -> Pose {
        Pose::from_yaw(Vec3::zeros(), angle)
    }

    fn assert_pose_eq(a: &Pose, b: &Pose, tol: f64) {
        assert!((a.translation - b.translation).norm() < tol, "{a:?} vs {b:?}");
        assert!(a.rotation.angle_to(&b.rotation) < tol, "{a:?} vs {b:?}");
    }

    #[test]
    fn compose_examples() {
        let p = Pose::from_yaw(Vec3::new(0.3, -1.0, 2.0), 0.7);
        assert_pose_eq(&compose(&Pose::identity(), &p), &p, 1e-12);

        let c = compose(
            &Pose::from_translation(1.0, 0.0, 0.0),
            &Pose::from_translation(0.0, 1.0, 0.0),
        );
        assert_pose_eq(&c, &Pose::from_translation(1.0, 1.0, 0.0), 1e-12);

        let c = compose(&rz(FRAC_PI_2), &Pose::from_translation(1.0, 0.0, 0.0));
        assert_pose_eq(&c, &Pose::from_yaw(Vec3::new(0.0, 1.0, 0.0), FRAC_PI_2), 1e-12);
    }

    #[test]
    fn inverse_examples() {
        assert_pose_eq(&inverse(&Pose::identity()), &Pose::identity(), 1e-12);
        assert_pose_eq(
            &inverse(&Pose::from_translation(1.0, 2.0, 3.0)),
            &Pose::from_translation(-1.0, -2.0, -3.0),
            1e-12,
        );
        assert_pose_eq(&inverse(&rz(FRAC_PI_2)), &rz(-FRAC_PI_2), 1e-12);
    }

    #[test]
    fn transform_points_examples() {
        let cloud = PointCloud::new(vec![Vec3::new(0.1, 0.2, 0.3), Vec3::zeros()], Frame::Robot);
        let same = transform_points(&Pose::identity(), &cloud, Frame::Robot);
        assert_eq!(same, cloud);

        let up = transform_points(
            &Pose::from_translation(0.0, 0.0, 1.0),
            &PointCloud::new(vec![Vec3::zeros()], Frame::Robot),
            Frame::World,
        );
        assert!((up.points[0] - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);

        let rot = transform_points(
            &rz(FRAC_PI_2),
            &PointCloud::new(vec![Vec3::new(1.0, 0.0, 0.0)], Frame::Robot),
            Frame::World,
        );
        assert!((rot.points[0] - Vec3::new(0.0, 1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn relative_transform_examples() {
        let p = Pose::from_yaw(Vec3::new(1.0, 2.0, 0.5), 0.3);
        assert_pose_eq(&relative_transform(&p, &p), &Pose::identity(), 1e-12);

        let r = relative_transform(&Pose::identity(), &Pose::from_translation(1.0, 0.0, 0.0));
        assert_pose_eq(&r, &Pose::from_translation(-1.0, 0.0, 0.0), 1e-12);
    }

    #[test]
    fn array_round_trip_uses_xyzw_order() {
        let p = rz(FRAC_PI_2);
        let a = p.to_array();
        assert!((a[5] - (FRAC_PI_2 / 2.0).sin()).abs() < 1e-12);
        assert!((a[6] - (FRAC_PI_2 / 2.0).cos()).abs() < 1e-12);
        assert_pose_eq(&Pose::from_array(a), &p, 1e-12);
    }

    #[test]
    fn renormalization_survives_long_chains() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut acc = Pose::identity();
        for _ in 0..10_000 {
            let axis = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let q = UnitQuaternion::from_scaled_axis(axis);
            let step = Pose::new(Vec3::new(0.01, -0.02, 0.005), q);
            acc = compose(&acc, &step);
            assert!((acc.rotation.quaternion().norm() - 1.0).abs() < 1e-6);
        }
    }

    fn arb_pose() -> impl Strategy<Value = Pose> {
        (
            prop::array::uniform3(-5.0f64..5.0),
            prop::array::uniform3(-3.0f64..3.0),
        )
            .prop_map(|(t, r)| {
                Pose::new(
                    Vec3::from(t),
                    UnitQuaternion::from_scaled_axis(Vector3::from(r)),
                )
            })
    }

    proptest! {
        #[test]
        fn compose_with_inverse_is_identity(p in arb_pose()) {
            let id = compose(&p, &inverse(&p));
            prop_assert!(id.translation.norm() < 1e-6);
            prop_assert!(id.rotation.angle() < 1e-6);
        }

        #[test]
        fn composition_matches_sequential_transform(
            a in arb_pose(),
            b in arb_pose(),
            pts in prop::collection::vec(prop::array::uniform3(-10.0f64..10.0), 1..20),
        ) {
            let cloud = PointCloud::new(pts.into_iter().map(Vec3::from).collect(), Frame::Robot);
            let direct = transform_points(&compose(&a, &b), &cloud, Frame::World);
            let chained = transform_points(&a, &transform_points(&b, &cloud, Frame::World), Frame::World);
            for (x, y) in direct.points.iter().zip(&chained.points) {
                prop_assert!((x - y).norm() < 1e-6);
            }
        }

        #[test]
        fn relative_transform_expresses_world_points_consistently(
            a in arb_pose(),
            b in arb_pose(),
            pts in prop::collection::vec(prop::array::uniform3(-10.0f64..10.0), 1..20),
        ) {
            // points given in frame a; expressing them in frame b through the
            // relative transform must match going through the world frame.
            let in_a = PointCloud::new(pts.into_iter().map(Vec3::from).collect(), Frame::Robot);
            let via_rel = transform_points(&relative_transform(&a, &b), &in_a, Frame::Robot);
            let world = transform_points(&a, &in_a, Frame::World);
            let via_world = transform_points(&inverse(&b), &world, Frame::Robot);
            for (x, y) in via_rel.points.iter().zip(&via_world.points) {
                prop_assert!((x - y).norm() < 1e-6);
            }
        }
    }
}
