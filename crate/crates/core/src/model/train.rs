use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::net::{ForwardPass, Model};
use super::rollout::Stepper;
use super::targets::{frame_target, target_pyramid, TrainFrame};
use crate::augment::{augment_frame, mirror_trajectory, sample_mirror_axes, AugmentConfig};
use crate::error::{Error, Result};
use crate::io::{FrameRecord, Trajectory};
use crate::nn::{adam_step, lr_schedule, occupancy_bce_loss, offset_loss, AdamState, Mode};
use crate::seed::derive_seed;
use crate::sparse::SparseTensor;
use crate::voxel::GridConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub rollout_len: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub alpha: f32,
    pub seed: u64,
    pub augment: AugmentConfig,
    pub grid: GridConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            batch_size: 32,
            rollout_len: 12,
            lr_start: 0.01,
            lr_end: 1e-4,
            alpha: 0.5,
            seed: 0,
            augment: AugmentConfig::default(),
            grid: GridConfig::default(),
        }
    }
}

/// One optimizer step of the loss log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLog {
    pub epoch: usize,
    pub step: u64,
    pub bce: f64,
    pub offset: f64,
    pub total: f64,
    pub lr: f64,
    /// The update was skipped because a gradient was not finite.
    pub skipped: bool,
}

/// Loss of one sample together with the parameter gradients.
#[derive(Debug, Clone)]
pub struct SampleLoss {
    pub bce: f64,
    pub offset: f64,
    pub grads: Option<Vec<Vec<f32>>>,
    pub pass: ForwardPass,
}

impl SampleLoss {
    pub fn total(&self) -> f64 {
        self.bce + self.offset
    }
}

/// Layer-wise BCE (mean per level, summed over levels) plus the offset loss
/// of a train-mode forward pass, and the gradients of that sum.
pub fn sample_loss(
    model: &Model,
    input: &SparseTensor<f32>,
    target: &SparseTensor<f32>,
    alpha: f32,
) -> Result<SampleLoss> {
    let levels = model.spec.levels();
    let pyramid = target_pyramid(target, levels);
    let pass = model.forward(input, alpha, Mode::Train)?;
    let mut bce = 0.0;
    let mut lik_grads = Vec::with_capacity(levels);
    for (j, lik) in pass.likelihoods.iter().enumerate() {
        let term = occupancy_bce_loss(lik, &pyramid[levels - 1 - j]);
        bce += term.value as f64;
        lik_grads.push(term.grad);
    }
    let off = offset_loss(&pass.estimate, target);
    let grads = match &pass.tape {
        Some(_) => Some(model.backward(&pass, &lik_grads, &off.grad)?),
        None => None,
    };
    Ok(SampleLoss {
        bce,
        offset: off.value as f64,
        grads,
        pass,
    })
}

/// Model plus optimizer state; owns the single-writer training loop.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: Model,
    pub adam: AdamState,
    /// Number of completed epochs.
    pub epoch: usize,
}

struct Window<'a> {
    id: u64,
    frames: &'a [FrameRecord],
}

impl Trainer {
    pub fn new(model: Model) -> Self {
        let adam = AdamState::new(&model.params);
        Self {
            model,
            adam,
            epoch: 0,
        }
    }

    /// One optimizer step on a batch of samples at the same time step. The
    /// samples run as one packed tensor, so batch norm sees statistics over
    /// the whole mini-batch. Returns the mean losses and each sample's
    /// estimate (pre-update weights).
    pub fn step(
        &mut self,
        samples: &[(SparseTensor<f32>, SparseTensor<f32>)],
        alpha: f32,
        lr: f64,
    ) -> Result<(f64, f64, bool, Vec<SparseTensor<f32>>)> {
        let span = pack_span(samples, 1 << self.model.spec.levels());
        let input = pack(samples.iter().map(|s| &s.0), span, 3)?;
        let target = pack(samples.iter().map(|s| &s.1), span, 3)?;
        let r = sample_loss(&self.model, &input, &target, alpha)?;
        let grads = r
            .grads
            .clone()
            .unwrap_or_else(|| self.model.params.iter().map(|p| vec![0.0; p.len()]).collect());
        let skipped = match adam_step(&mut self.model.params, &grads, &mut self.adam, lr) {
            Ok(()) => false,
            Err(Error::NonFiniteGradient(name)) => {
                log::warn!("skipping optimizer step: non-finite gradient in `{name}`");
                true
            }
            Err(e) => return Err(e),
        };
        self.model.apply_bn_updates(&r.pass);
        let estimates = unpack(&r.pass.estimate, span, samples.len())?;
        Ok((r.bce, r.offset, skipped, estimates))
    }

    /// One pass over all trajectories, cut into windows of `rollout_len`
    /// steps and shuffled into batches. Each time step of a batch is one
    /// optimizer step; the fed-back estimate is treated as a constant.
    pub fn train_epoch(&mut self, data: &[Trajectory], cfg: &TrainConfig) -> Result<Vec<StepLog>> {
        if cfg.rollout_len == 0 || cfg.batch_size == 0 {
            return Err(Error::Config("rollout length and batch size must be positive".into()));
        }
        let epoch = self.epoch;
        let lr = lr_schedule(epoch.min(cfg.epochs.saturating_sub(1)), cfg.epochs.max(1), cfg.lr_start, cfg.lr_end);
        let mut windows = Vec::new();
        for (ti, t) in data.iter().enumerate() {
            for (wi, chunk) in t.frames.chunks(cfg.rollout_len).enumerate() {
                windows.push(Window {
                    id: derive_seed(&[ti as u64, wi as u64]),
                    frames: chunk,
                });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, epoch as u64, 1]));
        windows.shuffle(&mut rng);

        let mut logs = Vec::new();
        for batch in windows.chunks(cfg.batch_size) {
            let seqs: Vec<Vec<TrainFrame>> = batch
                .iter()
                .map(|w| prepare_window(w, cfg, epoch))
                .collect();
            let mut steppers = vec![Stepper::new(); seqs.len()];
            let len = seqs.iter().map(Vec::len).max().unwrap_or(0);
            for t in 0..len {
                let active: Vec<usize> = (0..seqs.len()).filter(|&i| t < seqs[i].len()).collect();
                let mut samples = Vec::with_capacity(active.len());
                let mut grids = Vec::with_capacity(active.len());
                for &i in &active {
                    let f = &seqs[i][t];
                    let (g, input) = steppers[i].input(&f.odom_pose, &f.measurement, &cfg.grid)?;
                    let (_, target) = frame_target(f, &cfg.grid);
                    samples.push((input, target));
                    grids.push(g);
                }
                let (bce, offset, skipped, estimates) = self.step(&samples, cfg.alpha, lr)?;
                for ((&i, g), e) in active.iter().zip(&grids).zip(&estimates) {
                    steppers[i].advance(e, g);
                }
                logs.push(StepLog {
                    epoch,
                    step: self.adam.step,
                    bce,
                    offset,
                    total: bce + offset,
                    lr,
                    skipped,
                });
            }
        }
        self.epoch += 1;
        Ok(logs)
    }
}

/// Spacing along x between packed samples: a multiple of the coarsest
/// stride with a two-cell gap at that stride, wider than any kernel reach.
fn pack_span(samples: &[(SparseTensor<f32>, SparseTensor<f32>)], coarse: i32) -> i32 {
    let max_x = samples
        .iter()
        .flat_map(|(a, b)| a.coords().iter().chain(b.coords()))
        .map(|c| c[0])
        .max()
        .unwrap_or(0);
    ((max_x + coarse) / coarse + 2) * coarse
}

fn pack<'a>(
    parts: impl Iterator<Item = &'a SparseTensor<f32>>,
    span: i32,
    channels: usize,
) -> Result<SparseTensor<f32>> {
    let mut coords = Vec::new();
    let mut feats = Vec::new();
    for (b, t) in parts.enumerate() {
        let shift = b as i32 * span;
        coords.extend(t.coords().iter().map(|c| [c[0] + shift, c[1], c[2], c[3]]));
        feats.extend_from_slice(t.features());
    }
    SparseTensor::new(coords, feats, channels, [1; 4])
}

fn unpack(t: &SparseTensor<f32>, span: i32, n: usize) -> Result<Vec<SparseTensor<f32>>> {
    let c = t.channels();
    let mut parts = vec![(Vec::new(), Vec::new()); n];
    for (row, coord) in t.coords().iter().enumerate() {
        let b = coord[0].div_euclid(span);
        let (coords, feats) = &mut parts[b as usize];
        coords.push([coord[0] - b * span, coord[1], coord[2], coord[3]]);
        feats.extend_from_slice(t.row(row));
    }
    parts
        .into_iter()
        .map(|(coords, feats)| SparseTensor::new(coords, feats, c, t.stride()))
        .collect()
}

fn prepare_window(w: &Window, cfg: &TrainConfig, epoch: usize) -> Vec<TrainFrame> {
    let base = derive_seed(&[cfg.seed, epoch as u64, w.id]);
    let axes = sample_mirror_axes(&cfg.augment, base);
    let frames = mirror_trajectory(w.frames, &axes);
    frames
        .iter()
        .enumerate()
        .map(|(t, r)| {
            let (measurement, odom_pose) = augment_frame(
                &r.measurement,
                &r.odom_pose,
                &cfg.augment,
                derive_seed(&[base, t as u64]),
            );
            let mut f = TrainFrame::from_record(r);
            f.measurement = measurement;
            f.odom_pose = odom_pose;
            f
        })
        .collect()
}
