//! Terrain reconstruction from noisy depth measurements with a sparse 4D
//! convolutional encoder-decoder and auto-regressive feedback.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: rigid poses and point clouds.
//! * [`voxel`]: sub-voxel sparse voxelization and temporal concatenation.
//! * [`sparse`]: the sparse tensor, kernel maps, convolutions and pruning,
//!   each with an explicit backward pass.
//! * [`nn`]: batch norm, activations, losses, Adam and the learning-rate schedule.
//! * [`model`]: the encoder-decoder, rollouts, target pyramids and checkpoints.
//! * [`simgen`]: synthetic urban scenes, trajectories and depth-camera ray casting.
//! * [`augment`]: training-time measurement corruptions and mirroring.
//! * [`eval`]: occupancy metrics, height MAE, a Kalman elevation-map baseline,
//!   ICP and the sparsity ablation.
//! * [`io`]: the binary dataset, estimate and checkpoint formats.
//! * [`seed`]: sub-seed derivation shared by every randomized stage.
//! * [`app`]: run configuration and the command implementations behind the CLI.

pub mod app;
pub mod augment;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod model;
pub mod nn;
pub mod seed;
pub mod simgen;
pub mod sparse;
pub mod voxel;

pub use error::{Error, Result};
