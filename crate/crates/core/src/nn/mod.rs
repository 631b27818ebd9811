//! Layer primitives, losses, optimizer and learning-rate schedule.

mod activation;
mod adam;
mod batch_norm;
mod loss;
mod schedule;

pub use activation::{elu, elu_backward, sigmoid, sigmoid_backward};
pub use adam::{adam_step, AdamState, Param};
pub use batch_norm::{BatchNormRecord, BatchNormState, Mode};
pub use loss::{
    occupancy_bce_loss, offset_loss, LossTerm, Occupancy, BCE_CLAMP,
};
pub use schedule::lr_schedule;
