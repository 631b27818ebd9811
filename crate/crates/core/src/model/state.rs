use sha2::{Digest, Sha256};

use super::net::Model;
use super::spec::ModelSpec;
use crate::error::{Error, Result};
use crate::io::{Checkpoint, NamedTensor};
use crate::nn::AdamState;

const SPEC: &str = "meta.spec";
const SPEC_HASH: &str = "meta.spec_hash";
const EPOCH: &str = "meta.epoch";
const STEP: &str = "optim.step";

/// Splits an integer into base-2^24 digits so each is exact in `f32`.
fn int_digits(v: u64) -> Vec<f32> {
    vec![
        (v & 0xFF_FFFF) as f32,
        ((v >> 24) & 0xFF_FFFF) as f32,
        (v >> 48) as f32,
    ]
}

fn from_digits(d: &[f32]) -> Option<u64> {
    if d.len() != 3 || d.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
        return None;
    }
    Some(d[0] as u64 | (d[1] as u64) << 24 | (d[2] as u64) << 48)
}

/// Hash of the spec encoding, stored as base-2^24 digits.
pub fn spec_hash(spec: &ModelSpec) -> u64 {
    let mut h = Sha256::new();
    for v in spec.to_vec() {
        h.update(v.to_le_bytes());
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

fn missing(name: &str) -> Error {
    Error::Config(format!("checkpoint is missing tensor `{name}`"))
}

impl Model {
    /// Parameters, running statistics, spec, epoch counter and optionally
    /// the optimizer moments.
    pub fn to_checkpoint(&self, adam: Option<&AdamState>, epoch: usize) -> Checkpoint {
        let mut t = vec![
            NamedTensor::vector(SPEC, self.spec.to_vec()),
            NamedTensor::vector(SPEC_HASH, int_digits(spec_hash(&self.spec))),
            NamedTensor::vector(EPOCH, int_digits(epoch as u64)),
        ];
        for p in &self.params {
            let dims = p.shape.iter().map(|&d| d as u32).collect();
            t.push(NamedTensor::new(p.name.clone(), dims, p.data.clone()));
        }
        for s in &self.bn_stats {
            t.push(NamedTensor::vector(format!("{}.running_mean", s.name), s.mean.clone()));
            t.push(NamedTensor::vector(format!("{}.running_var", s.name), s.var.clone()));
        }
        if let Some(a) = adam {
            t.push(NamedTensor::vector(STEP, int_digits(a.step)));
            for (p, m) in self.params.iter().zip(&a.m) {
                t.push(NamedTensor::vector(format!("optim.m.{}", p.name), m.clone()));
            }
            for (p, v) in self.params.iter().zip(&a.v) {
                t.push(NamedTensor::vector(format!("optim.v.{}", p.name), v.clone()));
            }
        }
        Checkpoint { tensors: t }
    }

    /// Inverse of [`Model::to_checkpoint`]. Returns the model, the optimizer
    /// state if one was stored, and the epoch counter.
    pub fn from_checkpoint(c: &Checkpoint) -> Result<(Model, Option<AdamState>, usize)> {
        let get = |n: &str| c.get(n).ok_or_else(|| missing(n));
        let spec = ModelSpec::from_vec(&get(SPEC)?.data)?;
        let stored = from_digits(&get(SPEC_HASH)?.data);
        if stored != Some(spec_hash(&spec)) {
            return Err(Error::Config("checkpoint spec hash does not match its spec".into()));
        }
        let epoch = from_digits(&get(EPOCH)?.data)
            .ok_or_else(|| Error::Config("malformed epoch counter".into()))? as usize;
        let mut model = Model::new(spec, 0)?;
        let fill = |name: &str, dst: &mut Vec<f32>| -> Result<()> {
            let t = get(name)?;
            if t.data.len() != dst.len() {
                return Err(Error::Config(format!(
                    "tensor `{name}` has {} values, expected {}",
                    t.data.len(),
                    dst.len()
                )));
            }
            dst.copy_from_slice(&t.data);
            Ok(())
        };
        for p in &mut model.params {
            fill(&p.name.clone(), &mut p.data)?;
        }
        for s in &mut model.bn_stats {
            fill(&format!("{}.running_mean", s.name), &mut s.mean)?;
            fill(&format!("{}.running_var", s.name), &mut s.var)?;
        }
        let adam = match c.get(STEP) {
            None => None,
            Some(step) => {
                let mut a = AdamState::new(&model.params);
                a.step = from_digits(&step.data)
                    .ok_or_else(|| Error::Config("malformed optimizer step".into()))?;
                for (i, p) in model.params.iter().enumerate() {
                    fill(&format!("optim.m.{}", p.name), &mut a.m[i])?;
                    fill(&format!("optim.v.{}", p.name), &mut a.v[i])?;
                }
                Some(a)
            }
        };
        Ok((model, adam, epoch))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::{decode_checkpoint, encode_checkpoint};
    use std::path::Path;

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let model = Model::new(ModelSpec::desk(), 5).unwrap();
        let mut adam = AdamState::new(&model.params);
        adam.step = (1 << 30) + 17;
        adam.m[3][0] = 0.125;
        let bytes = encode_checkpoint(&model.to_checkpoint(Some(&adam), 7));
        let c = decode_checkpoint(&bytes, Path::new("m")).unwrap();
        let (back, a, epoch) = Model::from_checkpoint(&c).unwrap();
        assert_eq!(back.params, model.params);
        assert_eq!(back.bn_stats, model.bn_stats);
        assert_eq!(a.unwrap(), adam);
        assert_eq!(epoch, 7);
        assert_eq!(encode_checkpoint(&back.to_checkpoint(Some(&adam), 7)), bytes);
    }
}
