use super::net::{ForwardPass, Model};
use crate::error::{contract, Result};
use crate::geometry::{transform_points, Frame, PointCloud, Pose};
use crate::nn::Mode;
use crate::sparse::SparseTensor;
use crate::voxel::{devoxelize, reproject_previous, temporal_concat, voxelize_world, GridConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RolloutOptions {
    pub alpha: f32,
    /// Feed the previous estimate back as the `k = 1` slice. Disabling it
    /// gives the measurement-only ablation.
    pub feedback: bool,
    pub mode: Mode,
}

impl Default for RolloutOptions {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            feedback: true,
            mode: Mode::Eval,
        }
    }
}

/// Carries the previous estimate of one sequence between steps.
#[derive(Debug, Clone, Default)]
pub struct Stepper {
    prev: Option<(SparseTensor<f32>, GridConfig)>,
}

impl Stepper {
    pub fn new() -> Self {
        Self::default()
    }

    /// Network input for a robot-frame measurement taken at `pose`
    /// (world-from-robot). Returns the grid centred on the pose as well.
    pub fn input(
        &self,
        pose: &Pose,
        measurement: &PointCloud,
        grid: &GridConfig,
    ) -> Result<(GridConfig, SparseTensor<f32>)> {
        let cfg = grid.centered_on(&pose.translation);
        let world = transform_points(pose, measurement, Frame::World);
        let meas = voxelize_world(&world, &cfg, 0);
        let prev = match &self.prev {
            Some((est, prev_cfg)) => reproject_previous(est, prev_cfg, &cfg)?,
            None => SparseTensor::empty(3, [1; 4]),
        };
        Ok((cfg, temporal_concat(&meas, &prev)?))
    }

    /// Stores `estimate` (a `k = 0` tensor in grid `cfg`) for the next step.
    pub fn advance(&mut self, estimate: &SparseTensor<f32>, cfg: &GridConfig) {
        self.prev = Some((estimate.clone(), *cfg));
    }

    pub fn reset(&mut self) {
        self.prev = None;
    }
}

#[derive(Debug, Clone)]
pub struct RolloutStep {
    pub grid: GridConfig,
    pub input: SparseTensor<f32>,
    pub pass: ForwardPass,
}

impl RolloutStep {
    /// The estimate as a world-frame cloud.
    pub fn estimate_cloud(&self) -> PointCloud {
        devoxelize(&self.pass.estimate, &self.grid).expect("estimate has three channels")
    }
}

/// Runs the model over a time-ordered sequence. Each step sees the current
/// measurement and, with feedback on, the previous estimate re-projected into
/// the current grid; no gradient information crosses steps.
pub fn rollout(
    model: &Model,
    poses: &[Pose],
    measurements: &[PointCloud],
    grid: &GridConfig,
    opts: RolloutOptions,
) -> Result<Vec<RolloutStep>> {
    if poses.len() != measurements.len() {
        return contract(format!(
            "{} poses but {} measurements",
            poses.len(),
            measurements.len()
        ));
    }
    let mut stepper = Stepper::new();
    let mut out = Vec::with_capacity(poses.len());
    for (pose, meas) in poses.iter().zip(measurements) {
        let (cfg, input) = stepper.input(pose, meas, grid)?;
        let mut pass = model.forward(&input, opts.alpha, opts.mode)?;
        pass.tape = None;
        if opts.feedback {
            stepper.advance(&pass.estimate, &cfg);
        }
        out.push(RolloutStep {
            grid: cfg,
            input,
            pass,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::model::ModelSpec;

    fn floor_cloud() -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                pts.push(Vec3::new(-1.0 + 0.1 * i as f64, -1.0 + 0.1 * j as f64, -0.5));
            }
        }
        PointCloud::new(pts, Frame::Robot)
    }

    #[test]
    fn single_step_equals_forward_on_measurement() {
        let model = Model::new(ModelSpec::desk(), 3).unwrap();
        let grid = GridConfig::new(32, 0.1);
        let pose = Pose::from_translation(0.3, 0.2, 0.5);
        let steps = rollout(&model, &[pose], &[floor_cloud()], &grid, RolloutOptions {
            alpha: 0.3,
            ..Default::default()
        })
        .unwrap();
        let cfg = grid.centered_on(&pose.translation);
        let meas = voxelize_world(
            &transform_points(&pose, &floor_cloud(), Frame::World),
            &cfg,
            0,
        );
        let direct = model.forward(&meas, 0.3, Mode::Eval).unwrap();
        assert_eq!(steps[0].input, meas);
        assert_eq!(steps[0].pass.estimate, direct.estimate);
    }

    #[test]
    fn static_robot_feeds_back_both_slices() {
        let model = Model::new(ModelSpec::desk(), 3).unwrap();
        let grid = GridConfig::new(32, 0.1);
        let pose = Pose::from_translation(0.0, 0.0, 0.5);
        let mut stepper = Stepper::new();
        let (cfg, input) = stepper.input(&pose, &floor_cloud(), &grid).unwrap();
        assert!(input.coords().iter().all(|c| c[3] == 0));
        // stand-in for a trained model: the estimate reproduces the measurement
        stepper.advance(&input, &cfg);
        let (_, second) = stepper.input(&pose, &floor_cloud(), &grid).unwrap();
        assert_eq!(second.len(), 2 * input.len());
        for c in input.coords() {
            assert!(second.find(&[c[0], c[1], c[2], 1]).is_some());
        }
        let _ = model;
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let model = Model::new(ModelSpec::desk(), 3).unwrap();
        let grid = GridConfig::new(32, 0.1);
        let r = rollout(&model, &[Pose::identity()], &[], &grid, RolloutOptions::default());
        assert!(r.is_err());
    }
}
