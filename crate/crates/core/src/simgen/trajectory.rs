use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scene::Scene;
use crate::geometry::{Pose, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryParams {
    pub num_steps: usize,
    pub dt: f64,
    pub speed: (f64, f64),
    /// Base yaw relative to the walking direction is drawn from `±yaw_offset`.
    pub yaw_offset: f64,
    /// Base height above the local terrain.
    pub nominal_height: f64,
    /// Largest terrain height change the robot can step over.
    pub max_step: f64,
    /// Distance kept from the work-area border.
    pub margin: f64,
    pub start: Option<(Vec3, f64)>,
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        Self {
            num_steps: 12,
            dt: 0.2,
            speed: (0.3, 1.0),
            yaw_offset: PI,
            nominal_height: 0.5,
            max_step: 0.3,
            margin: 0.5,
            start: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrajectory {
    pub poses: Vec<Pose>,
    /// No reachable direction was found before `num_steps` poses.
    pub truncated: bool,
}

fn passable(scene: &Scene, from: &Vec3, to: &Vec3, max_step: f64, margin: f64) -> Option<f64> {
    let lim = scene.half_size - margin;
    if to.x.abs() > lim || to.y.abs() > lim {
        return None;
    }
    let h0 = scene.terrain_height(from.x, from.y)?;
    // sample the segment so thin obstacles are not skipped
    let n = ((to - from).norm() / 0.02).ceil().max(1.0) as usize;
    let mut h = h0;
    for i in 1..=n {
        let p = from + (to - from) * (i as f64 / n as f64);
        let hi = scene.terrain_height(p.x, p.y)?;
        if (hi - h).abs() > max_step {
            return None;
        }
        h = hi;
    }
    Some(h)
}

/// Kinematic walk with a randomized speed, heading and base orientation.
/// The base follows the terrain at a nominal height; height jumps above
/// `max_step` (walls, poles, high ledges) block motion, after which a new
/// heading is drawn. If none of 32 headings is passable the trajectory is
/// cut short.
pub fn sample_trajectory(scene: &Scene, params: &TrajectoryParams, seed: u64) -> SampledTrajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lim = (scene.half_size - params.margin).max(0.0);
    let uniform = |rng: &mut ChaCha8Rng, r: (f64, f64)| {
        if r.1 > r.0 {
            rng.random_range(r.0..=r.1)
        } else {
            r.0
        }
    };

    let (mut pos, mut heading) = match params.start {
        Some(s) => s,
        None => {
            let mut p = Vec3::zeros();
            for _ in 0..100 {
                p = Vec3::new(rng.random_range(-lim..=lim), rng.random_range(-lim..=lim), 0.0);
                let h = scene.terrain_height(p.x, p.y);
                let clear = scene.boxes.iter().all(|b| !b.covers_xy(p.x, p.y));
                if h.is_some() && clear {
                    break;
                }
            }
            (p, rng.random_range(-PI..PI))
        }
    };
    let ground = |p: &Vec3| scene.terrain_height(p.x, p.y).unwrap_or(0.0);
    pos.z = ground(&pos);
    let speed = uniform(&mut rng, params.speed);
    let offset = if params.yaw_offset > 0.0 {
        rng.random_range(-params.yaw_offset..=params.yaw_offset)
    } else {
        0.0
    };

    let pose_at = |p: &Vec3, heading: f64| {
        Pose::from_yaw(Vec3::new(p.x, p.y, p.z + params.nominal_height), heading + offset)
    };
    let mut poses = vec![pose_at(&pos, heading)];
    let mut truncated = false;
    while poses.len() < params.num_steps {
        let step = speed * params.dt;
        let mut moved = false;
        for attempt in 0..32 {
            if attempt > 0 {
                heading = rng.random_range(-PI..PI);
            }
            let dir = Vec3::new(heading.cos(), heading.sin(), 0.0);
            let to = pos + dir * step;
            if let Some(h) = passable(scene, &pos, &to, params.max_step, params.margin) {
                pos = Vec3::new(to.x, to.y, h);
                moved = true;
                break;
            }
        }
        if !moved {
            truncated = true;
            break;
        }
        poses.push(pose_at(&pos, heading));
    }
    SampledTrajectory { poses, truncated }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::scene::{Aabb, Kind};

    #[test]
    fn zero_speed_is_constant() {
        let p = TrajectoryParams {
            speed: (0.0, 0.0),
            num_steps: 5,
            ..Default::default()
        };
        let t = sample_trajectory(&Scene::flat(5.0), &p, 1);
        assert_eq!(t.poses.len(), 5);
        assert!(t.poses.iter().all(|q| *q == t.poses[0]));
    }

    #[test]
    fn straight_walk_spacing() {
        let p = TrajectoryParams {
            speed: (1.0, 1.0),
            dt: 0.1,
            num_steps: 10,
            yaw_offset: 0.0,
            start: Some((Vec3::new(-2.0, 0.0, 0.0), 0.0)),
            ..Default::default()
        };
        let t = sample_trajectory(&Scene::flat(5.0), &p, 2);
        for w in t.poses.windows(2) {
            assert!(((w[1].translation - w[0].translation).norm() - 0.1).abs() < 1e-9);
        }
        assert!(!t.truncated);
    }

    #[test]
    fn climbing_a_step_raises_the_base() {
        let mut scene = Scene::flat(5.0);
        scene.boxes.push(Aabb::new(Vec3::new(0.0, -2.0, 0.0), Vec3::new(4.0, 2.0, 0.15), Kind::Step));
        let p = TrajectoryParams {
            speed: (1.0, 1.0),
            dt: 0.1,
            num_steps: 8,
            yaw_offset: 0.0,
            start: Some((Vec3::new(-0.35, 0.0, 0.0), 0.0)),
            ..Default::default()
        };
        let t = sample_trajectory(&scene, &p, 3);
        let z: Vec<f64> = t.poses.iter().map(|q| q.translation.z).collect();
        assert!((z[0] - 0.5).abs() < 1e-9);
        assert!((z[7] - 0.65).abs() < 1e-9);
    }

    #[test]
    fn walls_are_not_crossed() {
        let mut scene = Scene::flat(3.0);
        scene.boxes.push(Aabb::new(Vec3::new(0.5, -3.0, 0.0), Vec3::new(0.7, 3.0, 1.5), Kind::Wall));
        let p = TrajectoryParams {
            num_steps: 60,
            start: Some((Vec3::new(0.0, 0.0, 0.0), 0.0)),
            ..Default::default()
        };
        for seed in 0..10 {
            let t = sample_trajectory(&scene, &p, seed);
            assert!(t.poses.iter().all(|q| q.translation.x < 0.5));
        }
    }

    #[test]
    fn boxed_in_robot_is_truncated() {
        let mut scene = Scene::flat(3.0);
        for (min, max) in [
            ([-0.15, -0.15], [-0.05, 0.15]),
            ([0.05, -0.15], [0.15, 0.15]),
            ([-0.15, -0.15], [0.15, -0.05]),
            ([-0.15, 0.05], [0.15, 0.15]),
        ] {
            scene.boxes.push(Aabb::new(
                Vec3::new(min[0], min[1], 0.0),
                Vec3::new(max[0], max[1], 1.0),
                Kind::Wall,
            ));
        }
        let p = TrajectoryParams {
            num_steps: 20,
            speed: (0.5, 0.5),
            start: Some((Vec3::zeros(), 0.0)),
            ..Default::default()
        };
        let t = sample_trajectory(&scene, &p, 1);
        assert!(t.truncated);
        assert!(t.poses.len() < 20);
    }
}
