use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Wall,
    Step,
    Box,
    Pole,
}

/// Axis-aligned solid box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
    pub kind: Kind,
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3, kind: Kind) -> Self {
        Self { min, max, kind }
    }

    /// Strictly inside (the surface does not count).
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] > self.min[i] && p[i] < self.max[i])
    }

    pub fn covers_xy(&self, x: f64, y: f64) -> bool {
        x >= self.min.x && x <= self.max.x && y >= self.min.y && y <= self.max.y
    }

    /// Slab intersection; the entry distance along `dir` if it is at least
    /// `t_min`.
    pub fn intersect(&self, origin: &Vec3, dir: &Vec3, t_min: f64) -> Option<f64> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            if dir[i].abs() < 1e-15 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
                continue;
            }
            let a = (self.min[i] - origin[i]) / dir[i];
            let b = (self.max[i] - origin[i]) / dir[i];
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            t0 = t0.max(a);
            t1 = t1.min(b);
        }
        (t0 <= t1 && t0 >= t_min).then_some(t0)
    }
}

/// A union of axis-aligned boxes above an optional ground plane at `z = 0`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Scene {
    pub ground: bool,
    pub boxes: Vec<Aabb>,
    /// Half edge of the square work area centred on the origin.
    pub half_size: f64,
}

impl Scene {
    pub fn flat(half_size: f64) -> Self {
        Self {
            ground: true,
            boxes: Vec::new(),
            half_size,
        }
    }

    /// Inside a solid (a box or below the ground plane).
    pub fn is_solid(&self, p: &Vec3) -> bool {
        (self.ground && p.z < 0.0) || self.boxes.iter().any(|b| b.contains(p))
    }

    /// Height of the top surface under `(x, y)`, if any.
    pub fn terrain_height(&self, x: f64, y: f64) -> Option<f64> {
        let base = self.ground.then_some(0.0);
        self.boxes
            .iter()
            .filter(|b| b.covers_xy(x, y))
            .map(|b| b.max.z)
            .fold(base, |acc, z| Some(acc.map_or(z, |a: f64| a.max(z))))
    }

    /// Nearest intersection of the ray `origin + t·dir`, `t ≥ t_min`.
    pub fn raycast(&self, origin: &Vec3, dir: &Vec3, t_min: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        if self.ground && dir.z < 0.0 && origin.z >= 0.0 {
            let t = -origin.z / dir.z;
            if t >= t_min {
                best = Some(t);
            }
        }
        for b in &self.boxes {
            if let Some(t) = b.intersect(origin, dir, t_min) {
                if best.is_none_or(|x| t < x) {
                    best = Some(t);
                }
            }
        }
        best
    }
}

fn range(rng: &mut ChaCha8Rng, r: (f64, f64)) -> f64 {
    if r.1 > r.0 {
        rng.random_range(r.0..=r.1)
    } else {
        r.0
    }
}

/// Sampling ranges and element counts for [`generate_scene`].
#[derive(Debug, Clone, PartialEq)]
pub struct SceneParams {
    pub half_size: f64,
    pub ground: bool,
    pub stair_width: (f64, f64),
    pub stair_height: (f64, f64),
    pub steps_per_stair: (u32, u32),
    pub box_size: (f64, f64),
    pub box_height: (f64, f64),
    pub corridor_width: (f64, f64),
    pub wall_height: f64,
    pub pole_width: (f64, f64),
    pub pole_height: (f64, f64),
    pub num_stairs: u32,
    pub num_boxes: u32,
    pub num_poles: u32,
    pub corridor: bool,
}

impl Default for SceneParams {
    fn default() -> Self {
        Self {
            half_size: 6.0,
            ground: true,
            stair_width: (0.2, 0.5),
            stair_height: (0.08, 0.25),
            steps_per_stair: (3, 6),
            box_size: (0.2, 2.0),
            box_height: (0.08, 0.25),
            corridor_width: (2.0, 6.0),
            wall_height: 1.5,
            pole_width: (0.08, 0.2),
            pole_height: (1.0, 2.0),
            num_stairs: 1,
            num_boxes: 6,
            num_poles: 2,
            corridor: true,
        }
    }
}

impl SceneParams {
    pub fn empty() -> Self {
        Self {
            num_stairs: 0,
            num_boxes: 0,
            num_poles: 0,
            corridor: false,
            ..Self::default()
        }
    }
}

/// Record of what [`generate_scene`] drew, for range checks.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SceneDraws {
    pub corridor_width: Option<f64>,
    /// `(tread, rise)` per staircase.
    pub stairs: Vec<(f64, f64)>,
    /// `(width, length, height)` per box.
    pub boxes: Vec<(f64, f64, f64)>,
}

pub fn generate_scene(params: &SceneParams, seed: u64) -> Scene {
    generate_scene_traced(params, seed).0
}

/// Corridor walls along x, staircases climbing in ±x as stacked slabs, flat
/// boxes and thin poles, all inside the work area.
pub fn generate_scene_traced(params: &SceneParams, seed: u64) -> (Scene, SceneDraws) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = params.half_size;
    let mut boxes = Vec::new();
    let mut draws = SceneDraws::default();

    let mut lateral = h;
    if params.corridor {
        let w = range(&mut rng, params.corridor_width);
        draws.corridor_width = Some(w);
        lateral = (w / 2.0).min(h);
        for side in [-1.0, 1.0] {
            let inner = side * w / 2.0;
            let outer = inner + side * 0.2;
            boxes.push(Aabb::new(
                Vec3::new(-h, inner.min(outer), 0.0),
                Vec3::new(h, inner.max(outer), params.wall_height),
                Kind::Wall,
            ));
        }
    }

    for _ in 0..params.num_stairs {
        let tread = range(&mut rng, params.stair_width);
        let rise = range(&mut rng, params.stair_height);
        draws.stairs.push((tread, rise));
        let n = rng.random_range(params.steps_per_stair.0..=params.steps_per_stair.1);
        let run = tread * n as f64;
        let landing = rng.random_range(0.5..1.5);
        let start = rng.random_range(-h + 0.5..(h - run - landing).max(-h + 0.6));
        let width = rng.random_range(1.0..3.0f64).min(2.0 * lateral);
        let y0 = rng.random_range(-lateral..(lateral - width).max(-lateral + 1e-3));
        let up = rng.random_bool(0.5);
        for i in 0..n {
            // step i spans from its riser to the far end of the landing
            let (x0, x1) = if up {
                (start + i as f64 * tread, start + run + landing)
            } else {
                (-(start + run + landing), -(start + i as f64 * tread))
            };
            boxes.push(Aabb::new(
                Vec3::new(x0, y0, 0.0),
                Vec3::new(x1, y0 + width, rise * (i + 1) as f64),
                Kind::Step,
            ));
        }
    }

    for _ in 0..params.num_boxes {
        let w = range(&mut rng, params.box_size);
        let l = range(&mut rng, params.box_size);
        let ht = range(&mut rng, params.box_height);
        draws.boxes.push((w, l, ht));
        let x = rng.random_range(-h..h - w);
        let y = rng.random_range(-lateral..(lateral - l).max(-lateral + 1e-3));
        boxes.push(Aabb::new(
            Vec3::new(x, y, 0.0),
            Vec3::new(x + w, y + l, ht),
            Kind::Box,
        ));
    }

    for _ in 0..params.num_poles {
        let w = range(&mut rng, params.pole_width);
        let ht = range(&mut rng, params.pole_height);
        let x = rng.random_range(-h..h - w);
        let y = rng.random_range(-lateral..(lateral - w).max(-lateral + 1e-3));
        boxes.push(Aabb::new(
            Vec3::new(x, y, 0.0),
            Vec3::new(x + w, y + w, ht),
            Kind::Pole,
        ));
    }

    (
        Scene {
            ground: params.ground,
            boxes,
            half_size: h,
        },
        draws,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_scene() {
        let p = SceneParams::default();
        assert_eq!(generate_scene(&p, 4), generate_scene(&p, 4));
        assert_ne!(generate_scene(&p, 4), generate_scene(&p, 5));
    }

    #[test]
    fn sampled_dimensions_stay_in_range() {
        let p = SceneParams {
            num_stairs: 3,
            num_boxes: 5,
            ..SceneParams::default()
        };
        let mut rises = 0;
        for seed in 0..400 {
            let (_, d) = generate_scene_traced(&p, seed);
            let w = d.corridor_width.unwrap();
            assert!((2.0..=6.0).contains(&w));
            for (tread, rise) in d.stairs {
                assert!((0.2..=0.5).contains(&tread));
                assert!((0.08..=0.25).contains(&rise));
                rises += 1;
            }
            for (bw, bl, bh) in d.boxes {
                assert!((0.2..=2.0).contains(&bw) && (0.2..=2.0).contains(&bl));
                assert!((0.08..=0.25).contains(&bh));
            }
        }
        assert!(rises >= 1000);
    }

    #[test]
    fn stair_steps_are_monotone() {
        let p = SceneParams {
            num_stairs: 1,
            num_boxes: 0,
            num_poles: 0,
            ..SceneParams::default()
        };
        for seed in 0..20 {
            let s = generate_scene(&p, seed);
            let steps: Vec<_> = s.boxes.iter().filter(|b| b.kind == Kind::Step).collect();
            for w in steps.windows(2) {
                assert!(w[1].max.z > w[0].max.z);
            }
        }
    }

    #[test]
    fn zero_counts_give_bare_ground() {
        let s = generate_scene(&SceneParams::empty(), 1);
        assert!(s.ground && s.boxes.is_empty());
    }

    #[test]
    fn ray_straight_down_hits_ground() {
        let s = Scene::flat(5.0);
        let t = s
            .raycast(&Vec3::new(0.0, 0.0, 1.0), &Vec3::new(0.0, 0.0, -1.0), 0.0)
            .unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        let empty = Scene::default();
        assert!(empty
            .raycast(&Vec3::new(0.0, 0.0, 1.0), &Vec3::new(0.0, 0.0, -1.0), 0.0)
            .is_none());
    }

    #[test]
    fn terrain_height_takes_the_top_box() {
        let mut s = Scene::flat(5.0);
        s.boxes.push(Aabb::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 0.2), Kind::Step));
        s.boxes.push(Aabb::new(Vec3::new(0.5, 0.0, 0.0), Vec3::new(1.0, 1.0, 0.4), Kind::Step));
        assert_eq!(s.terrain_height(0.2, 0.5), Some(0.2));
        assert_eq!(s.terrain_height(0.7, 0.5), Some(0.4));
        assert_eq!(s.terrain_height(2.0, 0.5), Some(0.0));
    }
}
