//! Generalized sparse 4D convolution engine.
//!
//! Tensors live on integer `(x, y, z, k)` lattices; spatial coordinates stay
//! in base-grid units and are multiples of the tensor stride. Every
//! differentiable operation returns what its backward pass needs, and the
//! backward functions take that record explicitly.

mod conv;
mod kernel_map;
mod prune;
mod tensor;

pub use conv::{
    conv_backward, conv_forward, sparse_conv, transposed_generative_conv, ConvGrads, ConvRecord,
    ConvWeights,
};
pub use kernel_map::{
    build_kernel_map, generative_output_coords, kernel_offsets, strided_output_coords, KernelMap,
};
pub use prune::{prune, prune_backward, PruneRecord};
pub use tensor::{floor_to_stride, Coord, CoordIndex, Scalar, SparseTensor};
