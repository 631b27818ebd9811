use std::path::Path;

use crate::augment::AugmentConfig;
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::io::read_file;
use crate::model::{ModelSpec, TrainConfig};
use crate::simgen::{DriftSpec, SimConfig, TrajectoryParams};
use crate::voxel::GridConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelChoice {
    Full,
    Desk,
}

impl ModelChoice {
    pub fn spec(self) -> ModelSpec {
        match self {
            ModelChoice::Full => ModelSpec::full(),
            ModelChoice::Desk => ModelSpec::desk(),
        }
    }
}

/// Every tunable of the command-line tools. Defaults are the full-size
/// settings; the `desk` preset shrinks grid, network and dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelChoice,
    pub grid_dim: u32,
    pub cell_size: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub rollout_len: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub alpha: f32,
    pub seed: u64,
    pub augment: AugmentConfig,
    pub trajectories: usize,
    pub steps: usize,
    pub gt_density: f64,
    pub drift_step: usize,
    pub drift_z: f64,
    pub sensor_variance: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelChoice::Full,
            grid_dim: 64,
            cell_size: 0.05,
            epochs: 40,
            batch_size: 32,
            rollout_len: 12,
            lr_start: 0.01,
            lr_end: 1e-4,
            alpha: 0.5,
            seed: 0,
            augment: AugmentConfig::default(),
            trajectories: 16_667,
            steps: 12,
            gt_density: 2000.0,
            drift_step: 0,
            drift_z: 0.0,
            sensor_variance: 1e-4,
        }
    }
}

/// `(key, description)` for every accepted key, in `--help` order.
pub const KEYS: &[(&str, &str)] = &[
    ("preset", "full | desk; applied before all other keys (default full)"),
    ("model", "network widths: full (8..128) | desk (4..64)"),
    ("grid_dim", "voxels per grid edge (full 64, desk 32)"),
    ("cell_size", "voxel edge in metres (full 0.05, desk 0.1)"),
    ("epochs", "training epochs (40)"),
    ("batch_size", "rollout windows per batch (32)"),
    ("rollout_len", "time steps per training window (12)"),
    ("lr_start", "learning rate of the first epoch (0.01)"),
    ("lr_end", "learning rate of the last epoch (1e-4)"),
    ("alpha", "pruning threshold (0.5)"),
    ("seed", "master seed (0)"),
    ("augment", "true | false: all training augmentations (true)"),
    ("augment.jitter", "point jitter bound in metres, 0 disables (0.05)"),
    ("augment.tilt_deg", "tilt bound in degrees, 0 disables (1)"),
    ("augment.patch_height", "patch height shift bound in metres, 0 disables (0.05)"),
    ("augment.patch_prune", "true | false: drop points in random patches (true)"),
    ("augment.outliers", "true | false: add outlier clusters (true)"),
    ("augment.pose_jitter", "odometry translation jitter bound in metres, 0 disables (0.05)"),
    ("augment.mirror_prob", "probability of mirroring per axis (0.5)"),
    ("trajectories", "trajectory files written by gen-data (full 16667, desk 84)"),
    ("steps", "time steps per generated trajectory (12)"),
    ("gt_density", "ground-truth surface samples per square metre (2000)"),
    ("drift_step", "time step of the injected odometry z step (0)"),
    ("drift_z", "size of the injected odometry z step in metres, 0 disables (0)"),
    ("sensor_variance", "elevation baseline measurement variance in m² (1e-4)"),
];

fn parse<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("cannot parse `{v}` for key `{key}`")))
}

fn bound(key: &str, v: &str) -> Result<Option<f64>> {
    let x: f64 = parse(key, v)?;
    if x < 0.0 {
        return Err(Error::Config(format!("`{key}` must not be negative")));
    }
    Ok((x > 0.0).then_some(x))
}

impl RunConfig {
    pub fn desk() -> Self {
        Self {
            model: ModelChoice::Desk,
            grid_dim: 32,
            cell_size: 0.1,
            trajectories: 84,
            ..Self::default()
        }
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let v = v.trim();
        match key {
            "preset" => {
                *self = match v {
                    "full" => Self::default(),
                    "desk" => Self::desk(),
                    _ => return Err(Error::Config(format!("unknown preset `{v}`"))),
                }
            }
            "model" => {
                self.model = match v {
                    "full" => ModelChoice::Full,
                    "desk" => ModelChoice::Desk,
                    _ => return Err(Error::Config(format!("unknown model `{v}`"))),
                }
            }
            "grid_dim" => self.grid_dim = parse(key, v)?,
            "cell_size" => self.cell_size = parse(key, v)?,
            "epochs" => self.epochs = parse(key, v)?,
            "batch_size" => self.batch_size = parse(key, v)?,
            "rollout_len" => self.rollout_len = parse(key, v)?,
            "lr_start" => self.lr_start = parse(key, v)?,
            "lr_end" => self.lr_end = parse(key, v)?,
            "alpha" => self.alpha = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "augment" => {
                self.augment = if parse(key, v)? {
                    AugmentConfig::default()
                } else {
                    AugmentConfig::none()
                }
            }
            "augment.jitter" => self.augment.jitter = bound(key, v)?,
            "augment.tilt_deg" => self.augment.tilt_deg = bound(key, v)?,
            "augment.patch_height" => self.augment.patch_height = bound(key, v)?,
            "augment.patch_prune" => self.augment.patch_prune = parse(key, v)?,
            "augment.outliers" => self.augment.outliers = parse(key, v)?,
            "augment.pose_jitter" => self.augment.pose_jitter = bound(key, v)?,
            "augment.mirror_prob" => self.augment.mirror_prob = parse(key, v)?,
            "trajectories" => self.trajectories = parse(key, v)?,
            "steps" => self.steps = parse(key, v)?,
            "gt_density" => self.gt_density = parse(key, v)?,
            "drift_step" => self.drift_step = parse(key, v)?,
            "drift_z" => self.drift_z = parse(key, v)?,
            "sensor_variance" => self.sensor_variance = parse(key, v)?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// Applies `key=value` pairs; a `preset` among them goes first.
    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<()> {
        if let Some((_, v)) = pairs.iter().rev().find(|(k, _)| k == "preset") {
            self.set("preset", v)?;
        }
        for (k, v) in pairs.iter().filter(|(k, _)| k != "preset") {
            self.set(k, v)?;
        }
        self.validate()
    }

    /// Defaults, then the file (if any), then the command-line overrides.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut pairs = Vec::new();
        if let Some(path) = file {
            let text = String::from_utf8(read_file(path)?)
                .map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
            pairs.extend(parse_pairs(&text)?);
        }
        for o in overrides {
            pairs.extend(parse_pairs(o)?);
        }
        let mut cfg = Self::default();
        let (presets, rest): (Vec<_>, Vec<_>) = pairs.into_iter().partition(|(k, _)| k == "preset");
        cfg.apply(&presets)?;
        cfg.apply(&rest)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.grid_dim == 0 || !(self.cell_size > 0.0) {
            return bad("grid_dim and cell_size must be positive");
        }
        if self.grid_dim % 16 != 0 {
            return bad("grid_dim must be a multiple of 16 (four stride-2 stages)");
        }
        if self.epochs == 0 || self.batch_size == 0 || self.rollout_len == 0 || self.steps == 0 {
            return bad("epochs, batch_size, rollout_len and steps must be positive");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.augment.mirror_prob) {
            return bad("augment.mirror_prob must lie in [0, 1]");
        }
        if !(self.gt_density > 0.0) || !(self.sensor_variance > 0.0) {
            return bad("gt_density and sensor_variance must be positive");
        }
        if !(self.lr_start > 0.0 && self.lr_end > 0.0) {
            return bad("learning rates must be positive");
        }
        Ok(())
    }

    pub fn grid(&self) -> GridConfig {
        GridConfig::new(self.grid_dim, self.cell_size)
    }

    pub fn sim(&self) -> SimConfig {
        let drift = if self.drift_z != 0.0 {
            DriftSpec::step(self.drift_step, Vec3::new(0.0, 0.0, self.drift_z))
        } else {
            DriftSpec::default()
        };
        SimConfig {
            trajectory: TrajectoryParams {
                num_steps: self.steps,
                ..Default::default()
            },
            grid: self.grid(),
            gt_density: self.gt_density,
            drift,
            ..Default::default()
        }
    }

    pub fn train(&self, grid: GridConfig) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            rollout_len: self.rollout_len,
            lr_start: self.lr_start,
            lr_end: self.lr_end,
            alpha: self.alpha,
            seed: self.seed,
            augment: self.augment.clone(),
            grid,
        }
    }

    /// The configuration as a `key=value` file that [`RunConfig::load`] reads back.
    pub fn to_text(&self) -> String {
        let b = |x: Option<f64>| x.unwrap_or(0.0);
        let model = match self.model {
            ModelChoice::Full => "full",
            ModelChoice::Desk => "desk",
        };
        let a = &self.augment;
        [
            format!("model={model}"),
            format!("grid_dim={}", self.grid_dim),
            format!("cell_size={}", self.cell_size),
            format!("epochs={}", self.epochs),
            format!("batch_size={}", self.batch_size),
            format!("rollout_len={}", self.rollout_len),
            format!("lr_start={}", self.lr_start),
            format!("lr_end={}", self.lr_end),
            format!("alpha={}", self.alpha),
            format!("seed={}", self.seed),
            format!("augment.jitter={}", b(a.jitter)),
            format!("augment.tilt_deg={}", b(a.tilt_deg)),
            format!("augment.patch_height={}", b(a.patch_height)),
            format!("augment.patch_prune={}", a.patch_prune),
            format!("augment.outliers={}", a.outliers),
            format!("augment.pose_jitter={}", b(a.pose_jitter)),
            format!("augment.mirror_prob={}", a.mirror_prob),
            format!("trajectories={}", self.trajectories),
            format!("steps={}", self.steps),
            format!("gt_density={}", self.gt_density),
            format!("drift_step={}", self.drift_step),
            format!("drift_z={}", self.drift_z),
            format!("sensor_variance={}", self.sensor_variance),
        ]
        .join("\n")
            + "\n"
    }
}

/// `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Config(format!("expected key=value, got `{l}`")))
        })
        .collect()
}

/// Help text listing all keys.
pub fn keys_help() -> String {
    let mut s = String::from("Configuration keys (config file or --set key=value):\n");
    for (k, d) in KEYS {
        s += &format!("  {k:<22} {d}\n");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_the_full_scale_values() {
        let c = RunConfig::default();
        assert_eq!((c.epochs, c.batch_size, c.rollout_len), (40, 32, 12));
        assert_eq!((c.grid_dim, c.cell_size), (64, 0.05));
        assert_eq!(c.model, ModelChoice::Full);
    }

    #[test]
    fn preset_applies_before_other_keys() {
        let c = RunConfig::load(None, &["epochs=3".into(), "preset=desk".into()]).unwrap();
        assert_eq!(c.grid_dim, 32);
        assert_eq!(c.epochs, 3);
    }

    #[test]
    fn file_then_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, "# comment\npreset = desk\nseed=4\nalpha=0.3\n").unwrap();
        let c = RunConfig::load(Some(&p), &["seed=9".into()]).unwrap();
        assert_eq!((c.seed, c.alpha, c.grid_dim), (9, 0.3, 32));
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::desk();
        c.set("augment.tilt_deg", "0").unwrap();
        c.set("drift_z", "-0.07").unwrap();
        let back = RunConfig::load(None, &[c.to_text()]).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn every_key_is_settable() {
        for (k, _) in KEYS {
            let v = match *k {
                "preset" | "model" => "desk",
                "augment" | "augment.patch_prune" | "augment.outliers" => "true",
                "grid_dim" => "32",
                _ => "1",
            };
            RunConfig::default().set(k, v).unwrap();
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RunConfig::load(None, &["nope=1".into()]).is_err());
        assert!(RunConfig::load(None, &["alpha=2".into()]).is_err());
        assert!(RunConfig::load(None, &["grid_dim=30".into()]).is_err());
        assert!(parse_pairs("just words").is_err());
    }
}
