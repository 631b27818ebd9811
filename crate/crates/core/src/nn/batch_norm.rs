use crate::error::{contract, Result};
use crate::sparse::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-channel batch normalization over all active coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState<T> {
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: T,
    pub epsilon: T,
    pub mode: Mode,
}

#[derive(Debug, Clone)]
pub struct BatchNormRecord<T> {
    pub mode: Mode,
    pub xhat: Vec<T>,
    pub inv_std: Vec<T>,
    pub batch_mean: Vec<T>,
    pub batch_var: Vec<T>,
    pub rows: usize,
}

fn lit<T: Scalar>(v: f64) -> T {
    T::from(v).expect("literal fits")
}

impl<T: Scalar> BatchNormState<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            momentum: lit(0.1),
            epsilon: lit(1e-5),
            mode: Mode::Train,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    /// Normalizes `x` (`rows × channels`). Does not touch the running
    /// statistics; see [`Self::update_running`] and [`Self::forward_mut`].
    pub fn forward(&self, x: &[T]) -> Result<(Vec<T>, BatchNormRecord<T>)> {
        let c = self.channels();
        if c == 0 || x.len() % c != 0 {
            return contract("feature length is not a multiple of the channel count");
        }
        let rows = x.len() / c;
        let (mean, var) = match self.mode {
            Mode::Train => {
                if rows == 0 {
                    return contract("batch norm in train mode needs at least one active coordinate");
                }
                let n = T::from(rows).unwrap();
                let mut mean = vec![T::zero(); c];
                for row in x.chunks_exact(c) {
                    for (m, v) in mean.iter_mut().zip(row) {
                        *m = *m + *v;
                    }
                }
                mean.iter_mut().for_each(|m| *m = *m / n);
                let mut var = vec![T::zero(); c];
                for row in x.chunks_exact(c) {
                    for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                        let d = *v - *m;
                        *s = *s + d * d;
                    }
                }
                var.iter_mut().for_each(|s| *s = *s / n);
                (mean, var)
            }
            Mode::Eval => (self.running_mean.clone(), self.running_var.clone()),
        };
        let inv_std: Vec<T> = var
            .iter()
            .map(|v| T::one() / (*v + self.epsilon).sqrt())
            .collect();
        let mut xhat = Vec::with_capacity(x.len());
        let mut y = Vec::with_capacity(x.len());
        for row in x.chunks_exact(c) {
            for j in 0..c {
                let h = (row[j] - mean[j]) * inv_std[j];
                xhat.push(h);
                y.push(self.gamma[j] * h + self.beta[j]);
            }
        }
        Ok((
            y,
            BatchNormRecord {
                mode: self.mode,
                xhat,
                inv_std,
                batch_mean: mean,
                batch_var: var,
                rows,
            },
        ))
    }

    /// Exponential moving update of the running statistics from a train-mode
    /// record (unbiased variance).
    pub fn update_running(&mut self, rec: &BatchNormRecord<T>) {
        if rec.mode != Mode::Train || rec.rows == 0 {
            return;
        }
        let m = self.momentum;
        let n = T::from(rec.rows).unwrap();
        let unbias = if rec.rows > 1 {
            n / (n - T::one())
        } else {
            T::one()
        };
        for j in 0..self.channels() {
            self.running_mean[j] = (T::one() - m) * self.running_mean[j] + m * rec.batch_mean[j];
            self.running_var[j] =
                (T::one() - m) * self.running_var[j] + m * rec.batch_var[j] * unbias;
        }
    }

    /// The batch-norm operation: forward plus running-stat update in train mode.
    pub fn forward_mut(&mut self, x: &[T]) -> Result<(Vec<T>, BatchNormRecord<T>)> {
        let (y, rec) = self.forward(x)?;
        self.update_running(&rec);
        Ok((y, rec))
    }

    /// Gradients `(d input, d gamma, d beta)`.
    pub fn backward(&self, rec: &BatchNormRecord<T>, gy: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
        let c = self.channels();
        let mut ggamma = vec![T::zero(); c];
        let mut gbeta = vec![T::zero(); c];
        for (grow, hrow) in gy.chunks_exact(c).zip(rec.xhat.chunks_exact(c)) {
            for j in 0..c {
                ggamma[j] = ggamma[j] + grow[j] * hrow[j];
                gbeta[j] = gbeta[j] + grow[j];
            }
        }
        let mut gx = vec![T::zero(); gy.len()];
        match rec.mode {
            Mode::Eval => {
                for (i, g) in gy.iter().enumerate() {
                    let j = i % c;
                    gx[i] = *g * self.gamma[j] * rec.inv_std[j];
                }
            }
            Mode::Train => {
                let n = T::from(rec.rows).unwrap();
                // dxhat = gy·γ; dx = inv_std/N · (N·dxhat − Σdxhat − xhat·Σ(dxhat·xhat))
                for i in 0..gy.len() {
                    let j = i % c;
                    let dxhat_sum = gbeta[j] * self.gamma[j];
                    let dxhat_xhat = ggamma[j] * self.gamma[j];
                    let dxhat = gy[i] * self.gamma[j];
                    gx[i] = rec.inv_std[j] / n
                        * (n * dxhat - dxhat_sum - rec.xhat[i] * dxhat_xhat);
                }
            }
        }
        (gx, ggamma, gbeta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_batch_normalizes_to_zero() {
        let bn = BatchNormState::<f64>::new(2);
        let (y, _) = bn.forward(&[3.0, -1.0, 3.0, -1.0, 3.0, -1.0]).unwrap();
        assert!(y.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn unit_variance_is_preserved() {
        let bn = BatchNormState::<f64>::new(1);
        let (y, _) = bn.forward(&[-1.0, 1.0]).unwrap();
        let s = 1.0 / (1.0f64 + 1e-5).sqrt();
        assert!((y[0] + s).abs() < 1e-12 && (y[1] - s).abs() < 1e-12);
        assert!((y[1] - 1.0).abs() < 1e-5);
    }

    #[test]
    fn eval_mode_is_affine_identity() {
        let mut bn = BatchNormState::<f64>::new(2);
        bn.mode = Mode::Eval;
        bn.running_var = vec![1.0, 1.0];
        let before = bn.clone();
        let x = [0.3, -2.0, 5.0, 1.0];
        let (y, _) = bn.forward_mut(&x).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-4);
        }
        assert_eq!(bn, before);
    }

    #[test]
    fn empty_train_batch_is_rejected() {
        let bn = BatchNormState::<f32>::new(3);
        assert!(bn.forward(&[]).is_err());
    }

    #[test]
    fn running_stats_move_toward_batch() {
        let mut bn = BatchNormState::<f64>::new(1);
        bn.forward_mut(&[2.0, 4.0]).unwrap();
        assert!((bn.running_mean[0] - 0.3).abs() < 1e-12);
        assert!((bn.running_var[0] - (0.9 + 0.1 * 2.0)).abs() < 1e-12);
        assert!(bn.running_var[0] >= 0.0);
    }
}
