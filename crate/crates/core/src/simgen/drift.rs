use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::{Pose, Vec3};

/// Odometry corruption: a constant per-step bias, sudden offsets from a
/// given step on, and an optional Gaussian random walk.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DriftSpec {
    pub bias_per_step: Vec3,
    /// `(step, offset)`: `offset` is added to every pose from `step` on.
    pub events: Vec<(usize, Vec3)>,
    /// Per-axis standard deviation of the random-walk increment.
    pub walk_sigma: f64,
}

impl DriftSpec {
    pub fn step(step: usize, offset: Vec3) -> Self {
        Self {
            events: vec![(step, offset)],
            ..Self::default()
        }
    }
}

/// Corrupted odometry for the true poses. Only translations drift.
pub fn inject_drift(poses: &[Pose], spec: &DriftSpec, seed: u64) -> Vec<Pose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let walk = (spec.walk_sigma > 0.0).then(|| Normal::new(0.0, spec.walk_sigma).unwrap());
    let mut acc = Vec3::zeros();
    poses
        .iter()
        .enumerate()
        .map(|(t, p)| {
            if let Some(n) = &walk {
                if t > 0 {
                    acc += Vec3::new(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng));
                }
            }
            let mut off = spec.bias_per_step * t as f64 + acc;
            for (s, o) in &spec.events {
                if t >= *s {
                    off += o;
                }
            }
            let mut q = *p;
            q.translation += off;
            q
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Vec<Pose> {
        (0..n).map(|i| Pose::from_translation(0.1 * i as f64, 0.0, 0.5)).collect()
    }

    #[test]
    fn zero_drift_is_identity() {
        let p = line(10);
        assert_eq!(inject_drift(&p, &DriftSpec::default(), 1), p);
    }

    #[test]
    fn step_event() {
        let p = line(10);
        let d = inject_drift(&p, &DriftSpec::step(4, Vec3::new(0.0, 0.0, -0.07)), 1);
        for t in 0..10 {
            let dz = d[t].translation.z - p[t].translation.z;
            let want = if t >= 4 { -0.07 } else { 0.0 };
            assert!((dz - want).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_bias() {
        let p = line(101);
        let spec = DriftSpec {
            bias_per_step: Vec3::new(0.001, 0.0, 0.0),
            ..DriftSpec::default()
        };
        let d = inject_drift(&p, &spec, 1);
        assert!((d[100].translation.x - p[100].translation.x - 0.1).abs() < 1e-12);
    }
}
