use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{
    evaluate_frame, evaluate_rollout, metrics_csv, sparsity_ablation, summarize, AblationRow,
    ElevationMap, MetricsRecord, Summary,
};
use crate::geometry::{transform_points, Frame, PointCloud};
use crate::io::{
    read_checkpoint, read_estimates, read_trajectory, write_atomic, write_checkpoint,
    write_estimates, write_trajectory, EstimateFrame, Trajectory,
};
use crate::model::{aligned_ground_truth, rollout, Model, RolloutOptions, StepLog, Trainer};
use crate::nn::Mode;
use crate::seed::derive_seed;
use crate::simgen::{generate_dataset, visibility_fraction};
use crate::sparse::{build_kernel_map, sparse_conv, ConvWeights};
use crate::voxel::GridConfig;

pub const DATASET_EXT: &str = "trec";
pub const CHECKPOINT_EXT: &str = "tckp";
pub const ESTIMATES_EXT: &str = "tpcs";
pub const LOSS_CSV_HEADER: &str = "epoch,step,bce,offset,total,lr";

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenSummary {
    pub files: Vec<PathBuf>,
    pub steps: usize,
    pub mean_visibility: Option<f64>,
}

/// Writes `cfg.trajectories` files `traj_NNNNN.trec` into `out`.
pub fn gen_data(cfg: &RunConfig, out: &Path) -> Result<GenSummary> {
    cfg.validate()?;
    let mut summary = GenSummary {
        files: Vec::new(),
        steps: 0,
        mean_visibility: None,
    };
    if cfg.trajectories == 0 {
        log::warn!("trajectories=0: nothing to generate");
        return Ok(summary);
    }
    create_dir(out)?;
    let sim = cfg.sim();
    let grid = cfg.grid();
    let (mut vis_sum, mut vis_n) = (0.0, 0usize);
    // bounded chunks keep memory flat for large datasets
    let chunk = 64;
    for start in (0..cfg.trajectories).step_by(chunk) {
        let n = chunk.min(cfg.trajectories - start);
        let seed = derive_seed(&[cfg.seed, start as u64]);
        for (j, t) in generate_dataset(&sim, n, seed).iter().enumerate() {
            let path = out.join(format!("traj_{:05}.{DATASET_EXT}", start + j));
            write_trajectory(&path, t)?;
            summary.files.push(path);
            summary.steps += t.frames.len();
            for f in &t.frames {
                if let Some(v) = visibility_fraction(f, &grid) {
                    vis_sum += v;
                    vis_n += 1;
                }
            }
        }
    }
    summary.mean_visibility = (vis_n > 0).then(|| vis_sum / vis_n as f64);
    Ok(summary)
}

/// A single trajectory file or every `.trec` file of a directory, sorted by name.
pub fn load_dataset(path: &Path) -> Result<Vec<(PathBuf, Trajectory)>> {
    let files = if path.is_dir() {
        let mut v: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == DATASET_EXT))
            .collect();
        v.sort();
        v
    } else {
        vec![path.to_path_buf()]
    };
    files
        .into_iter()
        .map(|p| read_trajectory(&p).map(|t| (p, t)))
        .collect()
}

/// The grid shared by all trajectories.
pub fn dataset_grid(data: &[(PathBuf, Trajectory)]) -> Result<GridConfig> {
    let (_, first) = data
        .first()
        .ok_or_else(|| Error::Config("dataset contains no trajectories".into()))?;
    for (p, t) in data {
        if t.grid_dim != first.grid_dim || t.cell_size != first.cell_size {
            return Err(Error::Config(format!("{} uses a different grid", p.display())));
        }
    }
    Ok(GridConfig::new(first.grid_dim, first.cell_size as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSummary {
    pub checkpoint: PathBuf,
    pub epochs_run: usize,
    pub optimizer_steps: u64,
    pub last: Option<StepLog>,
}

fn loss_rows(logs: &[StepLog]) -> String {
    logs.iter()
        .map(|l| format!("{},{},{:.6},{:.6},{:.6},{:.6e}\n", l.epoch, l.step, l.bce, l.offset, l.total, l.lr))
        .collect()
}

/// Trains up to `cfg.epochs` completed epochs, writing `epoch_NNN.tckp`,
/// `last.tckp` and `loss.csv` into `out` after every epoch. With `resume`
/// the model, optimizer and epoch counter continue from that checkpoint and
/// the loss log is appended to.
pub fn train(cfg: &RunConfig, data: &Path, out: &Path, resume: Option<&Path>) -> Result<TrainSummary> {
    cfg.validate()?;
    let data = load_dataset(data)?;
    let grid = dataset_grid(&data)?;
    let trajs: Vec<Trajectory> = data.into_iter().map(|(_, t)| t).collect();
    let tcfg = cfg.train(grid);
    create_dir(out)?;
    let loss_path = out.join("loss.csv");
    let mut trainer = match resume {
        Some(p) => {
            let (model, adam, epoch) = Model::from_checkpoint(&read_checkpoint(p)?)?;
            let mut t = Trainer::new(model);
            if let Some(a) = adam {
                t.adam = a;
            }
            t.epoch = epoch;
            t
        }
        None => {
            write_atomic(&loss_path, format!("{LOSS_CSV_HEADER}\n").as_bytes())?;
            Trainer::new(Model::new(cfg.model.spec(), derive_seed(&[cfg.seed, 7]))?)
        }
    };
    let mut log_text = match fs::read_to_string(&loss_path) {
        Ok(s) => s,
        Err(_) => format!("{LOSS_CSV_HEADER}\n"),
    };
    let last_path = out.join(format!("last.{CHECKPOINT_EXT}"));
    let mut summary = TrainSummary {
        checkpoint: last_path.clone(),
        epochs_run: 0,
        optimizer_steps: trainer.adam.step,
        last: None,
    };
    if trainer.epoch >= cfg.epochs {
        log::warn!("checkpoint already has {} epochs; nothing to do", trainer.epoch);
    }
    while trainer.epoch < cfg.epochs {
        let logs = trainer.train_epoch(&trajs, &tcfg)?;
        if let Some(l) = logs.last() {
            log::info!("epoch {} step {} loss {:.4} (bce {:.4}, offset {:.4})", l.epoch, l.step, l.total, l.bce, l.offset);
        }
        log_text += &loss_rows(&logs);
        write_atomic(&loss_path, log_text.as_bytes())?;
        let ckpt = trainer.model.to_checkpoint(Some(&trainer.adam), trainer.epoch);
        write_checkpoint(&out.join(format!("epoch_{:03}.{CHECKPOINT_EXT}", trainer.epoch)), &ckpt)?;
        write_checkpoint(&last_path, &ckpt)?;
        summary.epochs_run += 1;
        summary.last = logs.last().copied().or(summary.last);
    }
    summary.optimizer_steps = trainer.adam.step;
    Ok(summary)
}

pub fn load_model(checkpoint: &Path) -> Result<Model> {
    Ok(Model::from_checkpoint(&read_checkpoint(checkpoint)?)?.0)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn run_model(model: &Model, t: &Trajectory, grid: &GridConfig, alpha: f32) -> Result<Vec<EstimateFrame>> {
    let poses: Vec<_> = t.frames.iter().map(|f| f.odom_pose).collect();
    let meas: Vec<_> = t.frames.iter().map(|f| f.measurement.clone()).collect();
    let opts = RolloutOptions {
        alpha,
        ..Default::default()
    };
    Ok(rollout(model, &poses, &meas, grid, opts)?
        .iter()
        .zip(&poses)
        .map(|(s, p)| EstimateFrame {
            pose: *p,
            cloud: s.estimate_cloud(),
        })
        .collect())
}

/// Writes one `.tpcs` estimate file per trajectory into `out`.
pub fn infer(checkpoint: &Path, data: &Path, alpha: f32, out: &Path) -> Result<Vec<PathBuf>> {
    let model = load_model(checkpoint)?;
    let data = load_dataset(data)?;
    let grid = dataset_grid(&data)?;
    create_dir(out)?;
    data.iter()
        .map(|(p, t)| {
            let path = out.join(format!("{}.{ESTIMATES_EXT}", stem(p)));
            write_estimates(&path, &run_model(&model, t, &grid, alpha)?)?;
            Ok(path)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalSource {
    /// The ground truth scored against itself.
    GroundTruth,
    /// The raw measurement, placed with the odometry pose.
    Measurement,
    Checkpoint(PathBuf),
    /// Directory of `.tpcs` files named after the dataset files.
    Estimates(PathBuf),
    /// The per-cell Kalman height map, fused with odometry poses.
    Elevation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// `(trajectory, frame, record)`.
    pub rows: Vec<(usize, usize, MetricsRecord)>,
    pub summary: Summary,
}

impl EvalReport {
    pub fn csv(&self) -> String {
        metrics_csv(&self.rows)
    }
}

/// Scores every frame in the odometry-aligned frame and grid.
pub fn evaluate(source: &EvalSource, data: &Path, cfg: &RunConfig) -> Result<EvalReport> {
    let data = load_dataset(data)?;
    let grid = dataset_grid(&data)?;
    let model = match source {
        EvalSource::Checkpoint(p) => Some(load_model(p)?),
        _ => None,
    };
    let mut rows = Vec::new();
    for (ti, (path, t)) in data.iter().enumerate() {
        let records: Vec<MetricsRecord> = match source {
            EvalSource::Checkpoint(_) => {
                let opts = RolloutOptions {
                    alpha: cfg.alpha,
                    ..Default::default()
                };
                evaluate_rollout(model.as_ref().unwrap(), t, None, &grid, opts)?
            }
            _ => {
                let preds = predictions(source, path, t, cfg)?;
                t.frames
                    .iter()
                    .zip(&preds)
                    .map(|(f, pred)| {
                        let g = grid.centered_on(&f.odom_pose.translation);
                        evaluate_frame(pred, &aligned_ground_truth(f), &g)
                    })
                    .collect::<Result<_>>()?
            }
        };
        rows.extend(records.into_iter().enumerate().map(|(fi, m)| (ti, fi, m)));
    }
    let summary = summarize(&rows.iter().map(|r| r.2).collect::<Vec<_>>());
    Ok(EvalReport { rows, summary })
}

fn predictions(source: &EvalSource, path: &Path, t: &Trajectory, cfg: &RunConfig) -> Result<Vec<PointCloud>> {
    Ok(match source {
        EvalSource::GroundTruth => t.frames.iter().map(aligned_ground_truth).collect(),
        EvalSource::Measurement => t
            .frames
            .iter()
            .map(|f| transform_points(&f.odom_pose, &f.measurement, Frame::World))
            .collect(),
        EvalSource::Estimates(dir) => {
            let p = dir.join(format!("{}.{ESTIMATES_EXT}", stem(path)));
            let est = read_estimates(&p)?;
            if est.len() != t.frames.len() {
                return Err(Error::Config(format!(
                    "{} has {} frames, dataset {} has {}",
                    p.display(),
                    est.len(),
                    path.display(),
                    t.frames.len()
                )));
            }
            est.into_iter().map(|e| e.cloud).collect()
        }
        EvalSource::Elevation => {
            let mut map = ElevationMap::new(t.cell_size as f64);
            t.frames
                .iter()
                .map(|f| {
                    map.update(&f.measurement, &f.odom_pose, cfg.sensor_variance)?;
                    Ok(map.to_cloud())
                })
                .collect::<Result<_>>()?
        }
        EvalSource::Checkpoint(_) => unreachable!("handled by the caller"),
    })
}

pub fn ablate(checkpoint: &Path, data: &Path, rates: &[f64], cfg: &RunConfig) -> Result<Vec<AblationRow>> {
    if let Some(r) = rates.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::Config(format!("removal rate {r} outside [0, 1]")));
    }
    let model = load_model(checkpoint)?;
    let data = load_dataset(data)?;
    let grid = dataset_grid(&data)?;
    let trajs: Vec<Trajectory> = data.into_iter().map(|(_, t)| t).collect();
    let opts = RolloutOptions {
        alpha: cfg.alpha,
        ..Default::default()
    };
    sparsity_ablation(&model, &trajs, rates, &grid, opts, cfg.seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub name: &'static str,
    pub mean_ms: f64,
    pub detail: String,
}

fn time<R>(reps: usize, mut f: impl FnMut() -> R) -> f64 {
    let start = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(f());
    }
    start.elapsed().as_secs_f64() * 1000.0 / reps.max(1) as f64
}

/// Kernel-map construction, one convolution and a full forward pass on a
/// generated frame.
pub fn bench(cfg: &RunConfig, reps: usize) -> Result<Vec<BenchRow>> {
    let mut small = cfg.clone();
    small.trajectories = 1;
    small.steps = 2;
    let sim = small.sim();
    let t = generate_dataset(&sim, 1, cfg.seed).remove(0);
    let grid = cfg.grid();
    let stepper = crate::model::Stepper::new();
    let f = &t.frames[0];
    let (_, input) = stepper.input(&f.odom_pose, &f.measurement, &grid)?;
    let spec = cfg.model.spec();
    let model = Model::new(spec.clone(), cfg.seed)?;
    let w = ConvWeights::<f32>::zeros(spec.enc_kernel, spec.in_channels, spec.widths[0], false);

    let kmap_ms = time(reps, || {
        build_kernel_map(input.index(), input.coords(), spec.enc_kernel, [1; 4], [1; 4])
    });
    let pairs = build_kernel_map(input.index(), input.coords(), spec.enc_kernel, [1; 4], [1; 4]).num_pairs();
    let conv_ms = time(reps, || sparse_conv(&input, &w, [1; 4]).map(|r| r.0.len()));
    let fwd_ms = time(reps, || model.forward(&input, cfg.alpha, Mode::Eval).map(|p| p.estimate.len()));
    Ok(vec![
        BenchRow {
            name: "kernel_map",
            mean_ms: kmap_ms,
            detail: format!("{} coords, {pairs} pairs", input.len()),
        },
        BenchRow {
            name: "stem_conv",
            mean_ms: conv_ms,
            detail: format!("{} -> {} channels", spec.in_channels, spec.widths[0]),
        },
        BenchRow {
            name: "forward",
            mean_ms: fwd_ms,
            detail: format!("{} params, alpha {}", model.num_params(), cfg.alpha),
        },
    ])
}
