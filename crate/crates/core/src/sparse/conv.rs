use super::kernel_map::{
    build_kernel_map, generative_output_coords, kernel_offsets, strided_output_coords, KernelMap,
};
use super::tensor::{Scalar, SparseTensor};
use crate::error::{contract, Result};

/// Convolution parameters, laid out `(offset, c_in, c_out)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvWeights<T> {
    pub kernel_size: [usize; 4],
    pub c_in: usize,
    pub c_out: usize,
    pub weights: Vec<T>,
    pub bias: Option<Vec<T>>,
}

impl<T: Scalar> ConvWeights<T> {
    pub fn zeros(kernel_size: [usize; 4], c_in: usize, c_out: usize, bias: bool) -> Self {
        let k: usize = kernel_size.iter().product();
        Self {
            kernel_size,
            c_in,
            c_out,
            weights: vec![T::zero(); k * c_in * c_out],
            bias: bias.then(|| vec![T::zero(); c_out]),
        }
    }

    /// Identity on the center offset (odd kernels) or the zero offset
    /// (even kernels), zero elsewhere. Requires `c_in == c_out`.
    pub fn identity(kernel_size: [usize; 4], channels: usize) -> Self {
        let mut w = Self::zeros(kernel_size, channels, channels, false);
        let center = kernel_offsets(kernel_size)
            .iter()
            .position(|d| *d == [0, 0, 0, 0])
            .expect("every kernel contains the zero offset");
        for c in 0..channels {
            w.weights[center * channels * channels + c * channels + c] = T::one();
        }
        w
    }

    pub fn num_offsets(&self) -> usize {
        self.kernel_size.iter().product()
    }

    fn validate(&self) -> Result<()> {
        if self.weights.len() != self.num_offsets() * self.c_in * self.c_out {
            return contract("weight tensor shape does not match kernel size and channels");
        }
        if let Some(b) = &self.bias {
            if b.len() != self.c_out {
                return contract("bias length does not match output channels");
            }
        }
        Ok(())
    }
}

/// What a convolution's backward pass needs from its forward pass.
#[derive(Debug, Clone)]
pub struct ConvRecord<T> {
    pub kmap: KernelMap,
    pub input: Vec<T>,
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Vec<T>,
    pub weights: Vec<T>,
    pub bias: Option<Vec<T>>,
}

/// Gather-multiply-scatter over a kernel map. Accumulation runs offset-major,
/// so each output sums its contributions in a fixed order.
pub fn conv_forward<T: Scalar>(input: &[T], kmap: &KernelMap, w: &ConvWeights<T>) -> Vec<T> {
    let (cin, cout) = (w.c_in, w.c_out);
    let mut out = vec![T::zero(); kmap.n_out * cout];
    if let Some(b) = &w.bias {
        for row in out.chunks_exact_mut(cout) {
            row.copy_from_slice(b);
        }
    }
    for (d, pairs) in kmap.pairs.iter().enumerate() {
        let wd = &w.weights[d * cin * cout..(d + 1) * cin * cout];
        for &(i, o) in pairs {
            let x = &input[i as usize * cin..(i as usize + 1) * cin];
            let y = &mut out[o as usize * cout..(o as usize + 1) * cout];
            for (a, wrow) in x.iter().zip(wd.chunks_exact(cout)) {
                for (yv, wv) in y.iter_mut().zip(wrow) {
                    *yv = *yv + *a * *wv;
                }
            }
        }
    }
    out
}

/// Exact gradients of [`conv_forward`] with respect to its input features,
/// weights and bias.
pub fn conv_backward<T: Scalar>(
    record: &ConvRecord<T>,
    w: &ConvWeights<T>,
    grad_out: &[T],
) -> ConvGrads<T> {
    let (cin, cout) = (w.c_in, w.c_out);
    let kmap = &record.kmap;
    let mut gin = vec![T::zero(); kmap.n_in * cin];
    let mut gw = vec![T::zero(); w.weights.len()];
    for (d, pairs) in kmap.pairs.iter().enumerate() {
        let wd = &w.weights[d * cin * cout..(d + 1) * cin * cout];
        let gwd = &mut gw[d * cin * cout..(d + 1) * cin * cout];
        for &(i, o) in pairs {
            let (i, o) = (i as usize, o as usize);
            let x = &record.input[i * cin..(i + 1) * cin];
            let gy = &grad_out[o * cout..(o + 1) * cout];
            let gx = &mut gin[i * cin..(i + 1) * cin];
            for ci in 0..cin {
                let wrow = &wd[ci * cout..(ci + 1) * cout];
                let mut acc = T::zero();
                for (g, wv) in gy.iter().zip(wrow) {
                    acc = acc + *g * *wv;
                }
                gx[ci] = gx[ci] + acc;
                let a = x[ci];
                for (gwv, g) in gwd[ci * cout..(ci + 1) * cout].iter_mut().zip(gy) {
                    *gwv = *gwv + a * *g;
                }
            }
        }
    }
    let bias = w.bias.as_ref().map(|_| {
        let mut gb = vec![T::zero(); cout];
        for row in grad_out.chunks_exact(cout) {
            for (b, g) in gb.iter_mut().zip(row) {
                *b = *b + *g;
            }
        }
        gb
    });
    ConvGrads {
        input: gin,
        weights: gw,
        bias,
    }
}

fn spatial_factor(stride: [i32; 4]) -> Result<i32> {
    if stride[3] != 1 || stride[0] != stride[1] || stride[1] != stride[2] || stride[0] <= 0 {
        return contract(format!(
            "only isotropic spatial strides with temporal stride 1 are supported, got {stride:?}"
        ));
    }
    Ok(stride[0])
}

/// Sparse convolution. Stride 1 keeps the input coordinate set; a spatial
/// stride `s` maps coordinates to their floor-to-`s·tensor_stride` multiples
/// and multiplies the spatial tensor stride by `s`.
pub fn sparse_conv<T: Scalar>(
    input: &SparseTensor<T>,
    w: &ConvWeights<T>,
    stride: [i32; 4],
) -> Result<(SparseTensor<T>, ConvRecord<T>)> {
    w.validate()?;
    if input.channels() != w.c_in {
        return contract(format!(
            "input has {} channels, weights expect {}",
            input.channels(),
            w.c_in
        ));
    }
    let s = spatial_factor(stride)?;
    let in_stride = input.stride();
    let (out_index, out_stride) = if s == 1 {
        (input.index().clone(), in_stride)
    } else {
        let os = [in_stride[0] * s, in_stride[1] * s, in_stride[2] * s, in_stride[3]];
        (strided_output_coords(input.coords(), os[0]), os)
    };
    let kmap = build_kernel_map(
        input.index(),
        out_index.coords(),
        w.kernel_size,
        in_stride,
        stride,
    );
    let feats = conv_forward(input.features(), &kmap, w);
    let out = SparseTensor::from_parts(out_index, feats, w.c_out, out_stride);
    Ok((
        out,
        ConvRecord {
            kmap,
            input: input.features().to_vec(),
        },
    ))
}

/// Generative transposed convolution: every input coordinate creates all
/// children in its kernel footprint at the finer stride; overlapping children
/// sum their contributions.
pub fn transposed_generative_conv<T: Scalar>(
    input: &SparseTensor<T>,
    w: &ConvWeights<T>,
    stride: [i32; 4],
) -> Result<(SparseTensor<T>, ConvRecord<T>)> {
    w.validate()?;
    if input.channels() != w.c_in {
        return contract(format!(
            "input has {} channels, weights expect {}",
            input.channels(),
            w.c_in
        ));
    }
    spatial_factor(stride)?;
    let in_stride = input.stride();
    if (0..4).any(|d| in_stride[d] % stride[d] != 0) {
        return contract(format!(
            "tensor stride {in_stride:?} is not divisible by up-sampling stride {stride:?}"
        ));
    }
    let out_stride = [
        in_stride[0] / stride[0],
        in_stride[1] / stride[1],
        in_stride[2] / stride[2],
        in_stride[3] / stride[3],
    ];
    let (out_index, kmap) =
        generative_output_coords(input.coords(), w.kernel_size, out_stride, stride);
    let feats = conv_forward(input.features(), &kmap, w);
    let out = SparseTensor::from_parts(out_index, feats, w.c_out, out_stride);
    Ok((
        out,
        ConvRecord {
            kmap,
            input: input.features().to_vec(),
        },
    ))
}
