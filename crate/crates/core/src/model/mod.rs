//! The encoder-decoder network, auto-regressive rollouts and training.

mod net;
mod rollout;
mod spec;
mod state;
mod targets;
mod train;

pub use net::{BnStats, ForwardPass, Model, Tape};
pub use rollout::{rollout, RolloutOptions, RolloutStep, Stepper};
pub use spec::ModelSpec;
pub use targets::{aligned_ground_truth, frame_target, target_pyramid, TrainFrame};
pub use state::spec_hash;
pub use train::{sample_loss, SampleLoss, StepLog, TrainConfig, Trainer};
