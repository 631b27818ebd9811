use super::tensor::{Scalar, SparseTensor};
use crate::error::{contract, Result};

/// Rows of the input that survived pruning, in output order.
#[derive(Debug, Clone)]
pub struct PruneRecord {
    pub kept: Vec<usize>,
    pub n_in: usize,
}

/// Keeps exactly the coordinates whose likelihood is `>= alpha`. Features are
/// untouched and the likelihood tensor is not forwarded.
pub fn prune<T: Scalar>(
    features: &SparseTensor<T>,
    likelihood: &SparseTensor<T>,
    alpha: T,
) -> Result<(SparseTensor<T>, PruneRecord)> {
    if likelihood.channels() != 1 {
        return contract("likelihood tensor must have exactly one channel");
    }
    if features.len() != likelihood.len() {
        return contract("likelihood and feature tensors have different coordinate sets");
    }
    let same_order = features.coords() == likelihood.coords();
    let mut kept = Vec::new();
    for (row, c) in features.coords().iter().enumerate() {
        let lrow = if same_order {
            row
        } else {
            match likelihood.find(c) {
                Some(r) => r,
                None => {
                    return contract(format!(
                        "coordinate {c:?} has no likelihood; coordinate sets differ"
                    ))
                }
            }
        };
        if likelihood.features()[lrow] >= alpha {
            kept.push(row);
        }
    }
    let out = features.select(&kept);
    Ok((
        out,
        PruneRecord {
            kept,
            n_in: features.len(),
        },
    ))
}

/// Scatters gradients of the kept rows back; pruned rows receive zero.
pub fn prune_backward<T: Scalar>(record: &PruneRecord, channels: usize, grad_out: &[T]) -> Vec<T> {
    let mut g = vec![T::zero(); record.n_in * channels];
    for (o, &i) in record.kept.iter().enumerate() {
        g[i * channels..(i + 1) * channels]
            .copy_from_slice(&grad_out[o * channels..(o + 1) * channels]);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(ls: &[f32]) -> (SparseTensor<f32>, SparseTensor<f32>) {
        let coords: Vec<_> = (0..ls.len() as i32).map(|x| [x, 0, 0, 0]).collect();
        let f = SparseTensor::new(
            coords.clone(),
            (0..ls.len() * 2).map(|v| v as f32).collect(),
            2,
            [1; 4],
        )
        .unwrap();
        let l = SparseTensor::new(coords, ls.to_vec(), 1, [1; 4]).unwrap();
        (f, l)
    }

    #[test]
    fn threshold_examples() {
        let (f, l) = pair(&[0.7, 0.4]);
        let (out, rec) = prune(&f, &l, 0.5).unwrap();
        assert_eq!(out.coords(), &[[0, 0, 0, 0]]);
        assert_eq!(out.features(), &[0.0, 1.0]);
        assert_eq!(rec.kept, vec![0]);

        let (f, l) = pair(&[1e-6, 0.3, 0.999]);
        assert_eq!(prune(&f, &l, 0.0).unwrap().0.len(), 3);
        assert_eq!(prune(&f, &l, 1.0).unwrap().0.len(), 0);
    }

    #[test]
    fn mismatched_sets_are_rejected() {
        let (f, _) = pair(&[0.5, 0.5]);
        let l = SparseTensor::new(vec![[0, 0, 0, 0], [5, 0, 0, 0]], vec![0.5, 0.5], 1, [1; 4])
            .unwrap();
        assert!(prune(&f, &l, 0.5).is_err());
    }

    #[test]
    fn monotone_in_alpha() {
        let ls: Vec<f32> = (0..50).map(|i| ((i * 37) % 97) as f32 / 97.0 + 1e-3).collect();
        let (f, l) = pair(&ls);
        let mut last = usize::MAX;
        for a in 0..=20 {
            let n = prune(&f, &l, a as f32 / 20.0).unwrap().0.len();
            assert!(n <= last);
            last = n;
        }
    }

    #[test]
    fn backward_scatters_only_kept_rows() {
        let (f, l) = pair(&[0.9, 0.1, 0.8]);
        let (_, rec) = prune(&f, &l, 0.5).unwrap();
        let g = prune_backward(&rec, 2, &[1.0f32, 2.0, 3.0, 4.0]);
        assert_eq!(g, vec![1.0, 2.0, 0.0, 0.0, 3.0, 4.0]);
    }
}
