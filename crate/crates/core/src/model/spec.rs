use crate::error::{Error, Result};

/// Layer-by-layer architecture description.
///
/// A stem convolution maps the 3 offset channels to `widths[0]`; each of the
/// four encoder blocks is a strided convolution (spatial stride 2, temporal
/// stride 1) to the next width followed by a normal convolution. The decoder
/// mirrors the encoder with generative up-sampling, skip concatenation, a
/// normal convolution, a 1-channel likelihood head and pruning per level; a
/// final head maps to 3 channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub widths: Vec<usize>,
    pub enc_kernel: [usize; 4],
    pub enc_down_kernel: [usize; 4],
    pub dec_kernel: [usize; 4],
    pub dec_up_kernel: [usize; 4],
    pub head_kernel: [usize; 4],
    pub in_channels: usize,
    pub out_channels: usize,
    pub alpha: f32,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self::full()
    }
}

impl ModelSpec {
    /// Full-size network: widths 8..128 on a 64³ grid.
    pub fn full() -> Self {
        Self {
            widths: vec![8, 16, 32, 64, 128],
            enc_kernel: [3, 3, 3, 2],
            enc_down_kernel: [2, 2, 2, 2],
            dec_kernel: [3, 3, 3, 1],
            dec_up_kernel: [2, 2, 2, 1],
            head_kernel: [1, 1, 1, 1],
            in_channels: 3,
            out_channels: 3,
            alpha: 0.5,
        }
    }

    /// Half-width variant used with the 32³ desk grid.
    pub fn desk() -> Self {
        Self {
            widths: vec![4, 8, 16, 32, 64],
            ..Self::full()
        }
    }

    pub fn levels(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("inconsistent model spec: {m}")));
        if self.widths.len() != 5 {
            return bad("expected five channel widths (stem + four down-sampling stages)");
        }
        if self.widths.iter().any(|&w| w == 0) || self.in_channels == 0 || self.out_channels == 0
        {
            return bad("channel widths must be positive");
        }
        let kernels = [
            self.enc_kernel,
            self.enc_down_kernel,
            self.dec_kernel,
            self.dec_up_kernel,
            self.head_kernel,
        ];
        if kernels.iter().flatten().any(|&k| k == 0) {
            return bad("kernel sizes must be positive");
        }
        if self.enc_down_kernel[..3].iter().any(|&k| k < 2) {
            return bad("strided kernels must cover the stride-2 footprint");
        }
        if self.dec_up_kernel[..3] != [2, 2, 2] || self.dec_up_kernel[3] != 1 {
            return bad("generative up-sampling kernel must be (2,2,2,1)");
        }
        if self.dec_kernel[3] != 1 || self.head_kernel[3] != 1 {
            return bad("decoder kernels must have temporal size 1");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha must lie in [0, 1]");
        }
        Ok(())
    }

    /// Learnable parameter count (batch-norm running statistics excluded).
    pub fn num_params(&self) -> usize {
        let k = |s: [usize; 4]| s.iter().product::<usize>();
        let w = &self.widths;
        let mut n = k(self.enc_kernel) * self.in_channels * w[0] + 2 * w[0];
        for i in 1..w.len() {
            n += k(self.enc_down_kernel) * w[i - 1] * w[i] + 2 * w[i];
            n += k(self.enc_kernel) * w[i] * w[i] + 2 * w[i];
        }
        for i in (1..w.len()).rev() {
            n += k(self.dec_up_kernel) * w[i] * w[i - 1] + 2 * w[i - 1];
            n += k(self.dec_kernel) * 2 * w[i - 1] * w[i - 1] + 2 * w[i - 1];
            n += k(self.head_kernel) * w[i - 1] + 1;
        }
        n + k(self.head_kernel) * w[0] * self.out_channels + self.out_channels
    }

    /// Flat numeric encoding stored in checkpoints.
    pub fn to_vec(&self) -> Vec<f32> {
        let mut v: Vec<f32> = vec![self.widths.len() as f32];
        v.extend(self.widths.iter().map(|&w| w as f32));
        for k in [
            self.enc_kernel,
            self.enc_down_kernel,
            self.dec_kernel,
            self.dec_up_kernel,
            self.head_kernel,
        ] {
            v.extend(k.iter().map(|&s| s as f32));
        }
        v.extend([self.in_channels as f32, self.out_channels as f32, self.alpha]);
        v
    }

    pub fn from_vec(v: &[f32]) -> Result<Self> {
        let err = || Error::Config("malformed model spec record".into());
        let n = *v.first().ok_or_else(err)? as usize;
        if v.len() != 1 + n + 20 + 3 {
            return Err(err());
        }
        let widths = v[1..1 + n].iter().map(|&w| w as usize).collect();
        let k = |i: usize| -> [usize; 4] {
            let b = 1 + n + 4 * i;
            [v[b] as usize, v[b + 1] as usize, v[b + 2] as usize, v[b + 3] as usize]
        };
        let tail = 1 + n + 20;
        let spec = Self {
            widths,
            enc_kernel: k(0),
            enc_down_kernel: k(1),
            dec_kernel: k(2),
            dec_up_kernel: k(3),
            head_kernel: k(4),
            in_channels: v[tail] as usize,
            out_channels: v[tail + 1] as usize,
            alpha: v[tail + 2],
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        ModelSpec::full().validate().unwrap();
        ModelSpec::desk().validate().unwrap();
        assert_eq!(ModelSpec::full().levels(), 4);
    }

    #[test]
    fn inconsistent_specs_are_rejected() {
        let mut s = ModelSpec::full();
        s.widths.pop();
        assert!(s.validate().is_err());
        let mut s = ModelSpec::full();
        s.dec_up_kernel = [3, 3, 3, 1];
        assert!(s.validate().is_err());
        let mut s = ModelSpec::full();
        s.widths[2] = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn vec_round_trip() {
        let s = ModelSpec::desk();
        assert_eq!(ModelSpec::from_vec(&s.to_vec()).unwrap(), s);
    }
}
