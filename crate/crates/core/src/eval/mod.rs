//! Occupancy and height metrics, the elevation-map baseline, ICP and the
//! sparsity ablation.

mod elevation;
mod icp;
mod metrics;

pub use elevation::{ElevationMap, HeightCell};
pub use icp::{fit_rigid, icp_align, IcpResult, KdTree};
pub use metrics::{
    cell_metrics, evaluate_frame, harmonic, height_mae, occupancy_metrics, occupied_cells, summarize,
    Cells, MetricsRecord, Summary,
};

use rayon::prelude::*;

use crate::augment::remove_fraction;
use crate::error::Result;
use crate::geometry::PointCloud;
use crate::io::Trajectory;
use crate::model::{aligned_ground_truth, rollout, Model, RolloutOptions};
use crate::seed::derive_seed;
use crate::voxel::GridConfig;

/// Runs the model over a trajectory and scores every frame against the
/// ground truth moved into the odometry frame, in the grid the model saw.
/// `measurements` replaces the recorded ones when given.
pub fn evaluate_rollout(
    model: &Model,
    traj: &Trajectory,
    measurements: Option<&[PointCloud]>,
    grid: &GridConfig,
    opts: RolloutOptions,
) -> Result<Vec<MetricsRecord>> {
    let poses: Vec<_> = traj.frames.iter().map(|f| f.odom_pose).collect();
    let recorded: Vec<PointCloud>;
    let meas = match measurements {
        Some(m) => m,
        None => {
            recorded = traj.frames.iter().map(|f| f.measurement.clone()).collect();
            &recorded
        }
    };
    let steps = rollout(model, &poses, meas, grid, opts)?;
    steps
        .par_iter()
        .zip(&traj.frames)
        .map(|(s, f)| evaluate_frame(&s.estimate_cloud(), &aligned_ground_truth(f), &s.grid))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AblationRow {
    pub rate: f64,
    pub summary: Summary,
}

/// Mean metrics per removal rate; every frame's measurement loses `rate`
/// of its points before the rollout. Rows follow the order of `rates`.
pub fn sparsity_ablation(
    model: &Model,
    data: &[Trajectory],
    rates: &[f64],
    grid: &GridConfig,
    opts: RolloutOptions,
    seed: u64,
) -> Result<Vec<AblationRow>> {
    rates
        .iter()
        .map(|&rate| {
            let mut records = Vec::new();
            for (ti, t) in data.iter().enumerate() {
                let meas: Vec<PointCloud> = t
                    .frames
                    .iter()
                    .enumerate()
                    .map(|(fi, f)| {
                        remove_fraction(&f.measurement, rate, derive_seed(&[seed, ti as u64, fi as u64]))
                    })
                    .collect();
                records.extend(evaluate_rollout(model, t, Some(&meas), grid, opts)?);
            }
            Ok(AblationRow {
                rate,
                summary: summarize(&records),
            })
        })
        .collect()
}

pub const METRICS_CSV_HEADER: &str = "trajectory,frame,precision,recall,f1,mae_cm,tp,fp,fn,empty_pred";
pub const ABLATION_CSV_HEADER: &str =
    "rate,frames,precision,recall,macro_f1,mean_frame_f1,mae_cm,empty_frames";

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.6}"))
}

/// One line per frame, `(trajectory, frame, record)`.
pub fn metrics_csv(rows: &[(usize, usize, MetricsRecord)]) -> String {
    let mut s = format!("{METRICS_CSV_HEADER}\n");
    for (t, f, m) in rows {
        s += &format!(
            "{t},{f},{:.6},{:.6},{:.6},{},{},{},{},{}\n",
            m.precision,
            m.recall,
            m.f1,
            opt(m.mae_cm),
            m.tp,
            m.fp,
            m.fn_,
            u8::from(m.empty_pred)
        );
    }
    s
}

pub fn summary_csv_row(label: &str, s: &Summary) -> String {
    format!(
        "{label},{},{:.6},{:.6},{:.6},{:.6},{},{}",
        s.frames,
        s.precision,
        s.recall,
        s.macro_f1,
        s.mean_frame_f1,
        opt(s.mae_cm),
        s.empty_frames
    )
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = format!("{ABLATION_CSV_HEADER}\n");
    for r in rows {
        s += &summary_csv_row(&format!("{}", r.rate), &r.summary);
        s.push('\n');
    }
    s
}
