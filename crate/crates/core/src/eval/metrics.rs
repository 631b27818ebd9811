use rustc_hash::{FxHashMap, FxHashSet};

use crate::error::{contract, Result};
use crate::geometry::PointCloud;
use crate::voxel::GridConfig;

pub type Cells = FxHashSet<[i32; 3]>;

/// Precision, recall and F1 of one occupancy comparison plus the optional
/// top-surface height error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Mean absolute column height difference in centimetres.
    pub mae_cm: Option<f64>,
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// The prediction was empty; precision is reported as 0.
    pub empty_pred: bool,
}

pub fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

impl MetricsRecord {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let np = tp + fp;
        let precision = if np > 0 { tp as f64 / np as f64 } else { 0.0 };
        let ng = tp + fn_;
        let recall = if ng > 0 { tp as f64 / ng as f64 } else { 0.0 };
        Self {
            precision,
            recall,
            f1: harmonic(precision, recall),
            mae_cm: None,
            tp,
            fp,
            fn_,
            empty_pred: np == 0,
        }
    }
}

/// Occupied cells of a world-frame cloud inside the grid.
pub fn occupied_cells(cloud: &PointCloud, cfg: &GridConfig) -> Cells {
    let d = cfg.dim as i32;
    cloud
        .points
        .iter()
        .filter_map(|p| {
            let g = (p - cfg.origin) / cfg.cell_size;
            let c = [g.x.floor() as i32, g.y.floor() as i32, g.z.floor() as i32];
            c.iter().all(|v| (0..d).contains(v)).then_some(c)
        })
        .collect()
}

pub fn cell_metrics(pred: &Cells, gt: &Cells) -> Result<MetricsRecord> {
    if gt.is_empty() {
        return contract("ground truth has no occupied cells in the grid");
    }
    let tp = pred.iter().filter(|c| gt.contains(*c)).count();
    Ok(MetricsRecord::from_counts(tp, pred.len() - tp, gt.len() - tp))
}

/// Cell-level precision/recall/F1 of two world-frame clouds in grid `cfg`.
pub fn occupancy_metrics(pred: &PointCloud, gt: &PointCloud, cfg: &GridConfig) -> Result<MetricsRecord> {
    cell_metrics(&occupied_cells(pred, cfg), &occupied_cells(gt, cfg))
}

fn column_tops(cloud: &PointCloud, cfg: &GridConfig) -> FxHashMap<[i32; 2], f64> {
    let mut tops: FxHashMap<[i32; 2], f64> = FxHashMap::default();
    for p in cloud.points.iter().filter(|p| cfg.contains_world(p)) {
        let g = (p - cfg.origin) / cfg.cell_size;
        let key = [g.x.floor() as i32, g.y.floor() as i32];
        let e = tops.entry(key).or_insert(f64::NEG_INFINITY);
        *e = e.max(p.z);
    }
    tops
}

/// Mean absolute difference of per-column top heights over the columns
/// occupied in both clouds, in centimetres.
pub fn height_mae(pred: &PointCloud, gt: &PointCloud, cfg: &GridConfig) -> Result<f64> {
    let a = column_tops(pred, cfg);
    let b = column_tops(gt, cfg);
    let diffs: Vec<f64> = a
        .iter()
        .filter_map(|(k, za)| b.get(k).map(|zb| (za - zb).abs()))
        .collect();
    if diffs.is_empty() {
        return contract("no column is occupied in both clouds");
    }
    Ok(100.0 * diffs.iter().sum::<f64>() / diffs.len() as f64)
}

/// Occupancy metrics plus height error (left empty without common columns).
pub fn evaluate_frame(pred: &PointCloud, gt: &PointCloud, cfg: &GridConfig) -> Result<MetricsRecord> {
    let mut m = occupancy_metrics(pred, gt, cfg)?;
    m.mae_cm = height_mae(pred, gt, cfg).ok();
    Ok(m)
}

/// Averages over frames. `macro_f1` is the harmonic mean of the mean
/// precision and recall; `mean_frame_f1` averages the per-frame F1 values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub frames: usize,
    pub precision: f64,
    pub recall: f64,
    pub macro_f1: f64,
    pub mean_frame_f1: f64,
    /// Mean over frames that have a height error.
    pub mae_cm: Option<f64>,
    pub empty_frames: usize,
}

pub fn summarize(records: &[MetricsRecord]) -> Summary {
    let n = records.len();
    let mean = |f: &dyn Fn(&MetricsRecord) -> f64| {
        if n == 0 {
            0.0
        } else {
            records.iter().map(f).sum::<f64>() / n as f64
        }
    };
    let precision = mean(&|r| r.precision);
    let recall = mean(&|r| r.recall);
    let maes: Vec<f64> = records.iter().filter_map(|r| r.mae_cm).collect();
    Summary {
        frames: n,
        precision,
        recall,
        macro_f1: harmonic(precision, recall),
        mean_frame_f1: mean(&|r| r.f1),
        mae_cm: (!maes.is_empty()).then(|| maes.iter().sum::<f64>() / maes.len() as f64),
        empty_frames: records.iter().filter(|r| r.empty_pred).count(),
    }
}
