use crate::geometry::{compose, inverse, transform_points, Frame, PointCloud, Pose};
use crate::io::FrameRecord;
use crate::nn::Occupancy;
use crate::sparse::{floor_to_stride, SparseTensor};
use crate::voxel::{voxelize_world, GridConfig};

/// OR-pooled occupancy of `gt` at strides `1, 2, 4, …, 2^(levels−1)`.
pub fn target_pyramid(gt: &SparseTensor<f32>, levels: usize) -> Vec<Occupancy> {
    (0..levels)
        .map(|l| {
            gt.coords()
                .iter()
                .map(|c| {
                    let f = floor_to_stride(*c, 1 << l);
                    [f[0], f[1], f[2]]
                })
                .collect()
        })
        .collect()
}

/// A dataset frame with the ground truth moved into the robot frame, so that
/// measurement and target can both be placed with one (odometry) pose.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainFrame {
    pub odom_pose: Pose,
    pub measurement: PointCloud,
    pub ground_truth: PointCloud,
}

impl TrainFrame {
    pub fn from_record(r: &FrameRecord) -> Self {
        Self {
            odom_pose: r.odom_pose,
            measurement: r.measurement.clone(),
            ground_truth: transform_points(&inverse(&r.true_pose), &r.ground_truth, Frame::Robot),
        }
    }
}

/// Ground truth of `frame` in the odometry-aligned world frame, voxelized at
/// `k = 0` in the grid centred on the odometry pose.
pub fn frame_target(frame: &TrainFrame, grid: &GridConfig) -> (GridConfig, SparseTensor<f32>) {
    let cfg = grid.centered_on(&frame.odom_pose.translation);
    let world = transform_points(&frame.odom_pose, &frame.ground_truth, Frame::World);
    (cfg, voxelize_world(&world, &cfg, 0))
}

/// Ground truth of a record expressed in the odometry-aligned world frame.
pub fn aligned_ground_truth(r: &FrameRecord) -> PointCloud {
    let rel = compose(&r.odom_pose, &inverse(&r.true_pose));
    transform_points(&rel, &r.ground_truth, Frame::World)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(coords: Vec<[i32; 4]>) -> SparseTensor<f32> {
        let n = coords.len();
        SparseTensor::new(coords, vec![0.5; n * 3], 3, [1; 4]).unwrap()
    }

    #[test]
    fn single_coordinate() {
        let p = target_pyramid(&tensor(vec![[5, 3, 2, 0]]), 2);
        assert!(p[0].contains(&[5, 3, 2]));
        assert_eq!(p[1].len(), 1);
        assert!(p[1].contains(&[4, 2, 2]));
    }

    #[test]
    fn block_pools_to_one_cell() {
        let mut coords = Vec::new();
        for x in 0..2 {
            for y in 0..2 {
                for z in 0..2 {
                    coords.push([x, y, z, 0]);
                }
            }
        }
        let p = target_pyramid(&tensor(coords), 3);
        assert_eq!(p[0].len(), 8);
        assert_eq!(p[1].len(), 1);
        assert_eq!(p[2].len(), 1);
    }

    #[test]
    fn empty_ground_truth() {
        let p = target_pyramid(&SparseTensor::empty(3, [1; 4]), 4);
        assert_eq!(p.len(), 4);
        assert!(p.iter().all(|l| l.is_empty()));
    }
}
