use super::tensor::{floor_to_stride, Coord, CoordIndex};

/// Kernel offsets in a fixed order (last axis fastest). Odd sizes are
/// centered on zero, even sizes are forward-aligned over `[0, size)`.
pub fn kernel_offsets(kernel_size: [usize; 4]) -> Vec<Coord> {
    let range = |s: usize| -> Vec<i32> {
        let s = s as i32;
        if s % 2 == 1 {
            (-(s / 2)..=s / 2).collect()
        } else {
            (0..s).collect()
        }
    };
    let (rx, ry, rz, rk) = (
        range(kernel_size[0]),
        range(kernel_size[1]),
        range(kernel_size[2]),
        range(kernel_size[3]),
    );
    let mut out = Vec::with_capacity(rx.len() * ry.len() * rz.len() * rk.len());
    for &x in &rx {
        for &y in &ry {
            for &z in &rz {
                for &k in &rk {
                    out.push([x, y, z, k]);
                }
            }
        }
    }
    out
}

/// Per-offset `(input row, output row)` pairs driving gather-scatter
/// convolution.
#[derive(Debug, Clone)]
pub struct KernelMap {
    pub kernel_size: [usize; 4],
    pub stride: [i32; 4],
    pub offsets: Vec<Coord>,
    pub pairs: Vec<Vec<(u32, u32)>>,
    pub n_in: usize,
    pub n_out: usize,
}

impl KernelMap {
    pub fn num_offsets(&self) -> usize {
        self.offsets.len()
    }

    pub fn num_pairs(&self) -> usize {
        self.pairs.iter().map(Vec::len).sum()
    }
}

fn add_scaled(c: &Coord, d: &Coord, scale: [i32; 4]) -> Coord {
    [
        c[0] + d[0] * scale[0],
        c[1] + d[1] * scale[1],
        c[2] + d[2] * scale[2],
        c[3] + d[3] * scale[3],
    ]
}

/// Pairs `(i, o)` with `coord(o) + offset ⊙ offset_scale == coord(i)`.
///
/// `offset_scale` is the input tensor stride; `stride` is the convolution
/// stride and is only recorded. Pairs within an offset are ordered by output
/// row.
pub fn build_kernel_map(
    input: &CoordIndex,
    output: &[Coord],
    kernel_size: [usize; 4],
    offset_scale: [i32; 4],
    stride: [i32; 4],
) -> KernelMap {
    let offsets = kernel_offsets(kernel_size);
    let pairs = offsets
        .iter()
        .map(|d| {
            output
                .iter()
                .enumerate()
                .filter_map(|(o, c)| {
                    input
                        .get(&add_scaled(c, d, offset_scale))
                        .map(|i| (i as u32, o as u32))
                })
                .collect()
        })
        .collect();
    KernelMap {
        kernel_size,
        stride,
        offsets,
        pairs,
        n_in: input.len(),
        n_out: output.len(),
    }
}

/// Output coordinates of a strided convolution: the distinct
/// floor-to-stride multiples of the inputs, in first-seen order. The
/// temporal index is kept (temporal stride 1).
pub fn strided_output_coords(input: &[Coord], out_spatial_stride: i32) -> CoordIndex {
    let mut out = CoordIndex::with_capacity(input.len());
    for c in input {
        out.insert(floor_to_stride(*c, out_spatial_stride));
    }
    out
}

/// Generative up-sampling: every input coordinate spawns the children
/// `coord(i) + offset ⊙ out_stride` over the full kernel footprint.
pub fn generative_output_coords(
    input: &[Coord],
    kernel_size: [usize; 4],
    out_stride: [i32; 4],
    stride: [i32; 4],
) -> (CoordIndex, KernelMap) {
    let offsets = kernel_offsets(kernel_size);
    let mut out = CoordIndex::with_capacity(input.len() * offsets.len());
    let mut pairs: Vec<Vec<(u32, u32)>> = vec![Vec::with_capacity(input.len()); offsets.len()];
    for (i, c) in input.iter().enumerate() {
        for (di, d) in offsets.iter().enumerate() {
            let (o, _) = out.insert(add_scaled(c, d, out_stride));
            pairs[di].push((i as u32, o as u32));
        }
    }
    let n_out = out.len();
    (
        out,
        KernelMap {
            kernel_size,
            stride,
            offsets,
            pairs,
            n_in: input.len(),
            n_out,
        },
    )
}
