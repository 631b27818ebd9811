use crate::error::{Error, Result};

/// A named, shaped learnable tensor (row-major `f32`).
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Param {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self {
            name: name.into(),
            shape,
            data,
        }
    }

    pub fn zeros(name: impl Into<String>, shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self::new(name, shape, vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// First/second moment estimates per parameter element.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f32>>,
    pub v: Vec<Vec<f32>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(params: &[Param]) -> Self {
        Self {
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One bias-corrected Adam update. A non-finite gradient anywhere skips the
/// whole step and is reported.
pub fn adam_step(
    params: &mut [Param],
    grads: &[Vec<f32>],
    state: &mut AdamState,
    lr: f64,
) -> Result<()> {
    for (p, g) in params.iter().zip(grads) {
        if g.len() != p.len() {
            return Err(Error::Contract(format!(
                "gradient for `{}` has {} elements, parameter has {}",
                p.name,
                g.len(),
                p.len()
            )));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteGradient(p.name.clone()));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    for ((p, g), (m, v)) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        for i in 0..p.data.len() {
            let gi = g[i] as f64;
            let mi = b1 * m[i] as f64 + (1.0 - b1) * gi;
            let vi = b2 * v[i] as f64 + (1.0 - b2) * gi * gi;
            m[i] = mi as f32;
            v[i] = vi as f32;
            let update = lr * (mi / c1) / ((vi / c2).sqrt() + state.epsilon);
            p.data[i] = (p.data[i] as f64 - update) as f32;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(v: f32) -> Vec<Param> {
        vec![Param::new("w", vec![1], vec![v])]
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = one(0.5);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &[vec![0.0]], &mut s, 0.01).unwrap();
        assert_eq!(p[0].data[0], 0.5);
    }

    #[test]
    fn first_step_is_minus_lr_sign() {
        let mut p = one(0.0);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &[vec![1.0]], &mut s, 0.01).unwrap();
        assert!((p[0].data[0] + 0.01).abs() < 1e-6);
    }

    #[test]
    fn first_step_is_scale_invariant() {
        let step = |g: f32| {
            let mut p = one(0.0);
            let mut s = AdamState::new(&p);
            adam_step(&mut p, &[vec![g]], &mut s, 0.01).unwrap();
            p[0].data[0]
        };
        assert!((step(0.3) - step(3.0)).abs() < 1e-6);
    }

    #[test]
    fn non_finite_gradient_skips_step() {
        let mut p = one(1.0);
        let mut s = AdamState::new(&p);
        let err = adam_step(&mut p, &[vec![f32::NAN]], &mut s, 0.01).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient(_)));
        assert_eq!(p[0].data[0], 1.0);
        assert_eq!(s.step, 0);
    }
}
