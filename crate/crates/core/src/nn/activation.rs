use crate::sparse::Scalar;

/// `x` for `x > 0`, `e^x − 1` otherwise.
pub fn elu<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter()
        .map(|&v| if v > T::zero() { v } else { v.exp_m1() })
        .collect()
}

/// Gradient of [`elu`] given its output `y`.
pub fn elu_backward<T: Scalar>(y: &[T], grad: &[T]) -> Vec<T> {
    y.iter()
        .zip(grad)
        .map(|(&y, &g)| if y > T::zero() { g } else { g * (y + T::one()) })
        .collect()
}

pub fn sigmoid<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter()
        .map(|&v| {
            // split to avoid overflow of e^{-x} for very negative x
            if v >= T::zero() {
                T::one() / (T::one() + (-v).exp())
            } else {
                let e = v.exp();
                e / (T::one() + e)
            }
        })
        .collect()
}

/// Gradient of [`sigmoid`] given its output `y`.
pub fn sigmoid_backward<T: Scalar>(y: &[T], grad: &[T]) -> Vec<T> {
    y.iter()
        .zip(grad)
        .map(|(&y, &g)| g * y * (T::one() - y))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn elu_values() {
        let y = elu(&[0.0f64, 1.0, -1.0]);
        assert_eq!(y[0], 0.0);
        assert_eq!(y[1], 1.0);
        assert!((y[2] - (-0.6321205588285577)).abs() < 1e-12);
    }

    #[test]
    fn sigmoid_values() {
        assert_eq!(sigmoid(&[0.0f64])[0], 0.5);
        for x in [0.5f64, 2.0, 10.0] {
            let s = sigmoid(&[x, -x]);
            assert!((s[1] - (1.0 - s[0])).abs() < 1e-12);
        }
        let extreme = sigmoid(&[-1000.0f32, 1000.0]);
        assert!(extreme.iter().all(|v| v.is_finite()));
    }
}
