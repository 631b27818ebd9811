//! Binary file formats: trajectory datasets, estimate sequences and
//! checkpoints. All multi-byte values are little-endian.

mod bytes;
mod checkpoint;
mod dataset;
mod estimates;

pub use bytes::{read_file, write_atomic};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, Checkpoint,
    NamedTensor, CHECKPOINT_MAGIC,
};
pub use dataset::{
    decode_trajectory, encode_trajectory, read_trajectory, write_trajectory, FrameRecord,
    Trajectory, DATASET_MAGIC,
};
pub use estimates::{read_estimates, write_estimates, EstimateFrame, ESTIMATES_MAGIC};
