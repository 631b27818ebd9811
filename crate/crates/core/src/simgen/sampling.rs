use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scene::Scene;
use crate::geometry::{Frame, PointCloud, Vec3};

/// Axis-aligned world-frame region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub min: Vec3,
    pub max: Vec3,
}

impl Region {
    /// Cube of edge `extent` centred on `center`.
    pub fn cube(center: &Vec3, extent: f64) -> Self {
        let h = Vec3::repeat(extent / 2.0);
        Self {
            min: center - h,
            max: center + h,
        }
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] < self.max[i])
    }
}

/// Axis-aligned rectangle: fixed coordinate `axis = value`, spanning
/// `[lo, hi]` on the other two axes, with outward normal sign `side`.
struct Face {
    axis: usize,
    value: f64,
    side: f64,
    lo: [f64; 2],
    hi: [f64; 2],
}

fn others(axis: usize) -> [usize; 2] {
    match axis {
        0 => [1, 2],
        1 => [0, 2],
        _ => [0, 1],
    }
}

/// Uniform samples on every exposed surface inside `region`, about
/// `density` points per square metre. Faces are clipped to the region and
/// a sample is kept only if the space just outside the face is free, which
/// drops covered faces (box bottoms, faces shared by stacked steps).
pub fn sample_ground_truth(scene: &Scene, region: &Region, density: f64, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut faces = Vec::new();
    if scene.ground {
        faces.push(Face {
            axis: 2,
            value: 0.0,
            side: 1.0,
            lo: [region.min.x, region.min.y],
            hi: [region.max.x, region.max.y],
        });
    }
    for b in &scene.boxes {
        for axis in 0..3 {
            let [a, c] = others(axis);
            for (value, side) in [(b.min[axis], -1.0), (b.max[axis], 1.0)] {
                faces.push(Face {
                    axis,
                    value,
                    side,
                    lo: [b.min[a], b.min[c]],
                    hi: [b.max[a], b.max[c]],
                });
            }
        }
    }

    let eps = 1e-6;
    let mut pts = Vec::new();
    for f in faces {
        if f.value < region.min[f.axis] || f.value >= region.max[f.axis] {
            continue;
        }
        let [a, c] = others(f.axis);
        let lo = [f.lo[0].max(region.min[a]), f.lo[1].max(region.min[c])];
        let hi = [f.hi[0].min(region.max[a]), f.hi[1].min(region.max[c])];
        if hi[0] <= lo[0] || hi[1] <= lo[1] {
            continue;
        }
        let expected = (hi[0] - lo[0]) * (hi[1] - lo[1]) * density;
        let n = (expected + rng.random_range(0.0..1.0)).floor() as usize;
        for _ in 0..n {
            let mut p = Vec3::zeros();
            p[f.axis] = f.value;
            p[a] = rng.random_range(lo[0]..hi[0]);
            p[c] = rng.random_range(lo[1]..hi[1]);
            let mut probe = p;
            probe[f.axis] += f.side * eps;
            if !scene.is_solid(&probe) && region.contains(&p) {
                pts.push(p);
            }
        }
    }
    PointCloud::new(pts, Frame::World)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simgen::scene::{Aabb, Kind};

    #[test]
    fn flat_floor() {
        let r = Region::cube(&Vec3::new(0.3, -0.2, 0.5), 3.2);
        let g = sample_ground_truth(&Scene::flat(5.0), &r, 200.0, 1);
        assert!(g.len() > 1800 && g.len() < 2300);
        for p in &g.points {
            assert_eq!(p.z, 0.0);
            assert!((p.x - 0.3).abs() <= 1.6 && (p.y + 0.2).abs() <= 1.6);
        }
    }

    #[test]
    fn doubling_density_doubles_count() {
        let mut scene = Scene::flat(5.0);
        scene.boxes.push(Aabb::new(Vec3::new(0.2, 0.2, 0.0), Vec3::new(1.0, 0.8, 0.25), Kind::Box));
        let r = Region::cube(&Vec3::new(0.0, 0.0, 0.5), 3.2);
        let a = sample_ground_truth(&scene, &r, 300.0, 2).len() as f64;
        let b = sample_ground_truth(&scene, &r, 600.0, 3).len() as f64;
        assert!((b / a - 2.0).abs() < 0.2, "{a} {b}");
    }

    #[test]
    fn covered_faces_are_skipped() {
        let mut scene = Scene::flat(5.0);
        let b = Aabb::new(Vec3::new(-0.5, -0.5, 0.0), Vec3::new(0.5, 0.5, 0.2), Kind::Box);
        scene.boxes.push(b);
        let r = Region::cube(&Vec3::new(0.0, 0.0, 0.5), 3.2);
        let g = sample_ground_truth(&scene, &r, 400.0, 4);
        // no floor samples under the box, no box-bottom samples
        assert!(!g.points.iter().any(|p| p.z == 0.0 && b.contains(&Vec3::new(p.x, p.y, 0.1))));
        assert!(g.points.iter().any(|p| p.z == 0.2));
    }

    #[test]
    fn independent_of_cameras() {
        // the sampler never looks at sensors: same inputs, same cloud
        let r = Region::cube(&Vec3::zeros(), 3.2);
        let s = Scene::flat(5.0);
        assert_eq!(sample_ground_truth(&s, &r, 50.0, 9), sample_ground_truth(&s, &r, 50.0, 9));
    }
}
