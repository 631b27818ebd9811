use rustc_hash::FxHashSet;

use crate::sparse::{Scalar, SparseTensor};

/// Spatial occupancy at one resolution (the temporal index is ignored).
pub type Occupancy = FxHashSet<[i32; 3]>;

/// Probability clamp applied inside the binary cross-entropy.
pub const BCE_CLAMP: f64 = 1e-7;

/// A scalar loss together with its gradient with respect to the scored
/// tensor's features.
#[derive(Debug, Clone)]
pub struct LossTerm<T> {
    pub value: T,
    pub grad: Vec<T>,
    /// Nothing to score (empty tensor or empty intersection); `value` is 0.
    pub empty: bool,
    pub count: usize,
}

impl<T: Scalar> LossTerm<T> {
    fn empty(rows: usize, channels: usize) -> Self {
        Self {
            value: T::zero(),
            grad: vec![T::zero(); rows * channels],
            empty: true,
            count: 0,
        }
    }
}

/// Mean binary cross-entropy of a 1-channel likelihood tensor against the
/// target occupancy at the same resolution. Probabilities are clamped to
/// `[1e-7, 1 − 1e-7]`; the gradient is zero where the clamp is active.
pub fn occupancy_bce_loss<T: Scalar>(
    likelihood: &SparseTensor<T>,
    target: &Occupancy,
) -> LossTerm<T> {
    let n = likelihood.len();
    if n == 0 {
        return LossTerm::empty(0, 1);
    }
    let lo = T::from(BCE_CLAMP).unwrap();
    let hi = T::one() - lo;
    let nf = T::from(n).unwrap();
    let mut total = T::zero();
    let mut grad = Vec::with_capacity(n);
    for (c, &p) in likelihood.coords().iter().zip(likelihood.features()) {
        let y = target.contains(&[c[0], c[1], c[2]]);
        let pc = p.max(lo).min(hi);
        let inside = p > lo && p < hi;
        if y {
            total = total - pc.ln();
            grad.push(if inside { -T::one() / (pc * nf) } else { T::zero() });
        } else {
            total = total - (T::one() - pc).ln();
            grad.push(if inside {
                T::one() / ((T::one() - pc) * nf)
            } else {
                T::zero()
            });
        }
    }
    LossTerm {
        value: total / nf,
        grad,
        empty: false,
        count: n,
    }
}

/// Mean Euclidean distance between predicted and target features over the
/// coordinates present in both tensors.
pub fn offset_loss<T: Scalar>(pred: &SparseTensor<T>, target: &SparseTensor<T>) -> LossTerm<T> {
    let c = pred.channels();
    let mut matched = Vec::new();
    for (i, coord) in pred.coords().iter().enumerate() {
        if let Some(j) = target.find(coord) {
            matched.push((i, j));
        }
    }
    if matched.is_empty() {
        return LossTerm::empty(pred.len(), c);
    }
    let m = T::from(matched.len()).unwrap();
    let tiny = T::from(1e-12).unwrap();
    let mut total = T::zero();
    let mut grad = vec![T::zero(); pred.len() * c];
    for &(i, j) in &matched {
        let (a, b) = (pred.row(i), target.row(j));
        let dist = a
            .iter()
            .zip(b)
            .map(|(x, y)| (*x - *y) * (*x - *y))
            .sum::<T>()
            .sqrt();
        total = total + dist;
        if dist > tiny {
            for d in 0..c {
                grad[i * c + d] = (a[d] - b[d]) / (dist * m);
            }
        }
    }
    LossTerm {
        value: total / m,
        grad,
        empty: false,
        count: matched.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lik(ps: &[f64]) -> SparseTensor<f64> {
        let coords = (0..ps.len() as i32).map(|x| [x, 0, 0, 0]).collect();
        SparseTensor::new(coords, ps.to_vec(), 1, [1; 4]).unwrap()
    }

    fn occ(xs: &[i32]) -> Occupancy {
        xs.iter().map(|&x| [x, 0, 0]).collect()
    }

    #[test]
    fn bce_examples() {
        let l = occupancy_bce_loss(&lik(&[1.0 - 1e-7]), &occ(&[0]));
        assert!(l.value < 1e-6);
        let l = occupancy_bce_loss(&lik(&[0.5, 0.5]), &occ(&[0]));
        assert!((l.value - 2f64.ln()).abs() < 1e-12);
        let l = occupancy_bce_loss(&lik(&[1e-7]), &occ(&[0]));
        assert!((l.value - 16.118095650958319).abs() < 1e-9);
        let l = occupancy_bce_loss(&lik(&[]), &occ(&[0]));
        assert!(l.empty && l.value == 0.0);
    }

    fn off(coords: &[i32], f: &[[f64; 3]]) -> SparseTensor<f64> {
        SparseTensor::new(
            coords.iter().map(|&x| [x, 0, 0, 0]).collect(),
            f.iter().flatten().copied().collect(),
            3,
            [1; 4],
        )
        .unwrap()
    }

    #[test]
    fn offset_examples() {
        let a = off(&[0, 1], &[[0.1, 0.2, 0.3], [0.5, 0.5, 0.5]]);
        assert_eq!(offset_loss(&a, &a).value, 0.0);
        let p = off(&[0], &[[0.0, 0.0, 0.0]]);
        let t = off(&[0], &[[1.0, 0.0, 0.0]]);
        assert!((offset_loss(&p, &t).value - 1.0).abs() < 1e-12);
        let p = off(&[0, 1, 7], &[[0.0; 3], [0.0; 3], [0.9; 3]]);
        let t = off(&[0, 1, 9], &[[0.0; 3], [0.0, 1.0, 0.0], [0.0; 3]]);
        let l = offset_loss(&p, &t);
        assert!((l.value - 0.5).abs() < 1e-12);
        assert_eq!(l.count, 2);
        let none = offset_loss(&p, &off(&[3], &[[0.0; 3]]));
        assert!(none.empty && none.value == 0.0);
    }
}
