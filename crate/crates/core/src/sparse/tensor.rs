use std::fmt::Debug;

use num_traits::Float;
use rustc_hash::FxHashMap;

use crate::error::{contract, Result};

/// Integer lattice coordinate `(x, y, z, k)`.
pub type Coord = [i32; 4];

/// Floating point element type usable by the engine (`f32` for the model,
/// `f64` for gradient checks).
pub trait Scalar: Float + Debug + Default + Send + Sync + std::iter::Sum + 'static {}
impl<T: Float + Debug + Default + Send + Sync + std::iter::Sum + 'static> Scalar for T {}

/// Rounds each spatial component down to a multiple of `stride`; `k` is kept.
pub fn floor_to_stride(c: Coord, stride: i32) -> Coord {
    [
        c[0].div_euclid(stride) * stride,
        c[1].div_euclid(stride) * stride,
        c[2].div_euclid(stride) * stride,
        c[3],
    ]
}

/// Ordered coordinate set with a hash index. Row order is insertion order.
#[derive(Debug, Clone, Default)]
pub struct CoordIndex {
    coords: Vec<Coord>,
    index: FxHashMap<Coord, u32>,
}

impl PartialEq for CoordIndex {
    fn eq(&self, other: &Self) -> bool {
        self.coords == other.coords
    }
}

impl CoordIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            coords: Vec::with_capacity(n),
            index: FxHashMap::with_capacity_and_hasher(n, Default::default()),
        }
    }

    /// Inserts `c` if absent; returns its row and whether it was new.
    pub fn insert(&mut self, c: Coord) -> (usize, bool) {
        let next = self.coords.len() as u32;
        match self.index.entry(c) {
            std::collections::hash_map::Entry::Occupied(e) => (*e.get() as usize, false),
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(next);
                self.coords.push(c);
                (next as usize, true)
            }
        }
    }

    pub fn get(&self, c: &Coord) -> Option<usize> {
        self.index.get(c).map(|&i| i as usize)
    }

    pub fn contains(&self, c: &Coord) -> bool {
        self.index.contains_key(c)
    }

    pub fn coords(&self) -> &[Coord] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    /// Fails on duplicate coordinates.
    pub fn from_coords(coords: Vec<Coord>) -> Result<Self> {
        let mut idx = Self::with_capacity(coords.len());
        for c in coords {
            if !idx.insert(c).1 {
                return contract(format!("duplicate coordinate {c:?}"));
            }
        }
        Ok(idx)
    }
}

/// Sparse tensor: unique 4D coordinates with a `channels`-wide feature row
/// each, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTensor<T> {
    index: CoordIndex,
    features: Vec<T>,
    channels: usize,
    stride: [i32; 4],
}

impl<T: Scalar> SparseTensor<T> {
    /// Validates uniqueness, stride alignment and feature length.
    pub fn new(
        coords: Vec<Coord>,
        features: Vec<T>,
        channels: usize,
        stride: [i32; 4],
    ) -> Result<Self> {
        if stride.iter().any(|&s| s <= 0) {
            return contract(format!("tensor stride must be positive, got {stride:?}"));
        }
        if features.len() != coords.len() * channels {
            return contract(format!(
                "feature length {} does not match {} coords x {} channels",
                features.len(),
                coords.len(),
                channels
            ));
        }
        for c in &coords {
            if (0..4).any(|d| c[d].rem_euclid(stride[d]) != 0) {
                return contract(format!("coordinate {c:?} not aligned to stride {stride:?}"));
            }
        }
        let index = CoordIndex::from_coords(coords)?;
        Ok(Self {
            index,
            features,
            channels,
            stride,
        })
    }

    /// Skips validation; callers guarantee the invariants.
    pub(crate) fn from_parts(
        index: CoordIndex,
        features: Vec<T>,
        channels: usize,
        stride: [i32; 4],
    ) -> Self {
        debug_assert_eq!(features.len(), index.len() * channels);
        Self {
            index,
            features,
            channels,
            stride,
        }
    }

    pub fn empty(channels: usize, stride: [i32; 4]) -> Self {
        Self::from_parts(CoordIndex::new(), Vec::new(), channels, stride)
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn stride(&self) -> [i32; 4] {
        self.stride
    }

    pub fn coords(&self) -> &[Coord] {
        self.index.coords()
    }

    pub fn index(&self) -> &CoordIndex {
        &self.index
    }

    pub fn features(&self) -> &[T] {
        &self.features
    }

    pub fn features_mut(&mut self) -> &mut [T] {
        &mut self.features
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.features[i * self.channels..(i + 1) * self.channels]
    }

    pub fn find(&self, c: &Coord) -> Option<usize> {
        self.index.get(c)
    }

    /// Same coordinates and stride with new features.
    pub fn with_features(&self, features: Vec<T>, channels: usize) -> Result<Self> {
        if features.len() != self.len() * channels {
            return contract("feature length does not match coordinate count");
        }
        Ok(Self::from_parts(
            self.index.clone(),
            features,
            channels,
            self.stride,
        ))
    }

    /// Rows at `rows`, in that order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let c = self.channels;
        let mut idx = CoordIndex::with_capacity(rows.len());
        let mut feats = Vec::with_capacity(rows.len() * c);
        for &r in rows {
            idx.insert(self.index.coords()[r]);
            feats.extend_from_slice(self.row(r));
        }
        Self::from_parts(idx, feats, c, self.stride)
    }

    pub fn cast<U: Scalar>(&self) -> SparseTensor<U> {
        SparseTensor::from_parts(
            self.index.clone(),
            self.features
                .iter()
                .map(|v| U::from(*v).expect("float cast"))
                .collect(),
            self.channels,
            self.stride,
        )
    }
}
