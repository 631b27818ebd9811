use nalgebra::{Matrix3, Rotation3, SymmetricEigen, UnitQuaternion};

use crate::error::{Error, Result};
use crate::geometry::{PointCloud, Pose, Vec3};

/// Static 3-d tree over a point set for nearest-neighbour queries.
pub struct KdTree<'a> {
    points: &'a [Vec3],
    /// Point indices arranged as an implicit balanced tree.
    order: Vec<usize>,
}

impl<'a> KdTree<'a> {
    pub fn new(points: &'a [Vec3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build(points, &mut order, 0);
        Self { points, order }
    }

    /// Index and squared distance of the nearest point.
    pub fn nearest(&self, q: &Vec3) -> Option<(usize, f64)> {
        let mut best = None;
        self.search(&self.order, 0, q, &mut best);
        best
    }

    fn search(&self, slice: &[usize], depth: usize, q: &Vec3, best: &mut Option<(usize, f64)>) {
        if slice.is_empty() {
            return;
        }
        let mid = slice.len() / 2;
        let i = slice[mid];
        let p = &self.points[i];
        let d2 = (p - q).norm_squared();
        if best.is_none_or(|(_, b)| d2 < b) {
            *best = Some((i, d2));
        }
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            (&slice[..mid], &slice[mid + 1..])
        } else {
            (&slice[mid + 1..], &slice[..mid])
        };
        self.search(near, depth + 1, q, best);
        if best.is_none_or(|(_, b)| diff * diff < b) {
            self.search(far, depth + 1, q, best);
        }
    }
}

fn build(points: &[Vec3], order: &mut [usize], depth: usize) {
    if order.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |a, b| points[*a][axis].total_cmp(&points[*b][axis]));
    let (lo, hi) = order.split_at_mut(mid);
    build(points, lo, depth + 1);
    build(points, &mut hi[1..], depth + 1);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpResult {
    /// Target-from-source transform.
    pub pose: Pose,
    pub rmse: f64,
    pub iterations: usize,
    /// The RMSE improvement fell below the tolerance before `max_iter`.
    pub converged: bool,
}

fn centroid(pts: &[Vec3]) -> Vec3 {
    pts.iter().sum::<Vec3>() / pts.len() as f64
}

fn check_shape(cloud: &PointCloud, what: &str) -> Result<()> {
    if cloud.len() < 3 {
        return Err(Error::Degenerate(format!("{what} has fewer than 3 points")));
    }
    let c = centroid(&cloud.points);
    let mut cov = Matrix3::zeros();
    for p in &cloud.points {
        let d = p - c;
        cov += d * d.transpose();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(cov / cloud.len() as f64).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    if ev[1] <= 1e-12 * ev[0].max(1e-300) {
        return Err(Error::Degenerate(format!("{what} is collinear")));
    }
    Ok(())
}

/// Least-squares rigid transform mapping `src[i]` onto `dst[i]`.
pub fn fit_rigid(src: &[Vec3], dst: &[Vec3]) -> Pose {
    let cs = centroid(src);
    let cd = centroid(dst);
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        h += (s - cs) * (d - cd).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut v = vt.transpose();
    if (v * u.transpose()).determinant() < 0.0 {
        v.column_mut(2).neg_mut();
    }
    let r = v * u.transpose();
    let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    Pose::new(cd - rot * cs, rot)
}

fn matches(tree: &KdTree, target: &[Vec3], src: &[Vec3], pose: &Pose) -> (Vec<Vec3>, f64) {
    let mut sum = 0.0;
    let dst = src
        .iter()
        .map(|p| {
            let (i, d2) = tree.nearest(&pose.transform_point(p)).expect("target is not empty");
            sum += d2;
            target[i]
        })
        .collect();
    (dst, (sum / src.len() as f64).sqrt())
}

/// Point-to-point ICP. Iterations that would raise the RMSE are rejected,
/// so the returned pose is the best one visited.
pub fn icp_align(
    source: &PointCloud,
    target: &PointCloud,
    init: &Pose,
    max_iter: usize,
    tol: f64,
) -> Result<IcpResult> {
    check_shape(source, "source")?;
    check_shape(target, "target")?;
    let tree = KdTree::new(&target.points);
    let mut pose = *init;
    let (mut dst, mut rmse) = matches(&tree, &target.points, &source.points, &pose);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let cand = fit_rigid(&source.points, &dst);
        let (cand_dst, cand_rmse) = matches(&tree, &target.points, &source.points, &cand);
        if cand_rmse > rmse {
            converged = true;
            break;
        }
        let gain = rmse - cand_rmse;
        pose = cand;
        dst = cand_dst;
        rmse = cand_rmse;
        if gain < tol {
            converged = true;
            break;
        }
    }
    Ok(IcpResult {
        pose,
        rmse,
        iterations,
        converged,
    })
}
