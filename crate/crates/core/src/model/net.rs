//! The sparse 4D encoder-decoder and its hand-written backward pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::spec::ModelSpec;
use crate::error::{contract, Result};
use crate::nn::{
    elu, elu_backward, sigmoid, sigmoid_backward, BatchNormRecord, BatchNormState, Mode, Param,
};
use crate::sparse::{
    conv_backward, prune, prune_backward, sparse_conv, transposed_generative_conv, ConvRecord,
    ConvWeights, PruneRecord, SparseTensor,
};

const DOWN: [i32; 4] = [2, 2, 2, 1];

#[derive(Debug, Clone, Copy)]
struct ConvSlot {
    w: usize,
    b: Option<usize>,
    kernel: [usize; 4],
    c_in: usize,
    c_out: usize,
}

#[derive(Debug, Clone, Copy)]
struct BnSlot {
    gamma: usize,
    beta: usize,
    stats: usize,
}

#[derive(Debug, Clone, Copy)]
struct Cbe {
    conv: ConvSlot,
    bn: BnSlot,
}

#[derive(Debug, Clone)]
struct DecSlots {
    up: Cbe,
    conv: Cbe,
    head: ConvSlot,
}

#[derive(Debug, Clone)]
struct Layout {
    stem: Cbe,
    enc: Vec<(Cbe, Cbe)>,
    /// Coarse to fine: `dec[0]` up-samples the latent.
    dec: Vec<DecSlots>,
    out: ConvSlot,
}

/// Batch-norm running statistics of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct BnStats {
    pub name: String,
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
}

/// The reconstruction network: parameters, running statistics and layout.
#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub params: Vec<Param>,
    pub bn_stats: Vec<BnStats>,
    layout: Layout,
}

struct Builder<'a> {
    params: Vec<Param>,
    stats: Vec<BnStats>,
    rng: &'a mut ChaCha8Rng,
}

impl Builder<'_> {
    fn conv(
        &mut self,
        name: &str,
        kernel: [usize; 4],
        c_in: usize,
        c_out: usize,
        bias: bool,
        gain: f64,
    ) -> ConvSlot {
        let k: usize = kernel.iter().product();
        let bound = gain * (6.0 / (k * c_in) as f64).sqrt();
        let data = (0..k * c_in * c_out)
            .map(|_| self.rng.random_range(-bound..bound) as f32)
            .collect();
        self.params.push(Param::new(
            format!("{name}.weight"),
            vec![k, c_in, c_out],
            data,
        ));
        let w = self.params.len() - 1;
        let b = bias.then(|| {
            self.params
                .push(Param::zeros(format!("{name}.bias"), vec![c_out]));
            self.params.len() - 1
        });
        ConvSlot {
            w,
            b,
            kernel,
            c_in,
            c_out,
        }
    }

    fn bn(&mut self, name: &str, c: usize) -> BnSlot {
        self.params
            .push(Param::new(format!("{name}.gamma"), vec![c], vec![1.0; c]));
        self.params
            .push(Param::zeros(format!("{name}.beta"), vec![c]));
        self.stats.push(BnStats {
            name: name.to_string(),
            mean: vec![0.0; c],
            var: vec![1.0; c],
        });
        BnSlot {
            gamma: self.params.len() - 2,
            beta: self.params.len() - 1,
            stats: self.stats.len() - 1,
        }
    }

    fn cbe(&mut self, name: &str, kernel: [usize; 4], c_in: usize, c_out: usize) -> Cbe {
        Cbe {
            conv: self.conv(&format!("{name}.conv"), kernel, c_in, c_out, false, 1.0),
            bn: self.bn(&format!("{name}.bn"), c_out),
        }
    }
}

/// Per-layer record of a conv → batch norm → ELU block.
#[derive(Debug, Clone)]
struct CbeTape {
    conv: ConvRecord<f32>,
    bn: BatchNormRecord<f32>,
    out: Vec<f32>,
}

#[derive(Debug, Clone)]
struct DecTape {
    up: CbeTape,
    up_rows: usize,
    /// Encoder row matched by each decoder row for the skip concatenation.
    skip: Vec<Option<usize>>,
    conv: CbeTape,
    head: ConvRecord<f32>,
    likelihood: Vec<f32>,
    prune: PruneRecord,
}

#[derive(Debug, Clone)]
struct OutTape {
    conv: ConvRecord<f32>,
    sig: Vec<f32>,
    rows: usize,
    estimate_rows: Vec<usize>,
}

/// Everything recorded by a forward pass that backward and the trainer need.
#[derive(Debug, Clone)]
pub struct Tape {
    mode: Mode,
    stem: CbeTape,
    enc: Vec<(CbeTape, CbeTape)>,
    enc_rows: Vec<usize>,
    dec: Vec<DecTape>,
    out: Option<OutTape>,
}

/// Result of [`Model::forward`].
#[derive(Debug, Clone)]
pub struct ForwardPass {
    /// `k = 0` slice of the output head at tensor stride 1: sub-voxel
    /// offsets of the current estimate.
    pub estimate: SparseTensor<f32>,
    /// Per-decoder-level likelihood tensors, coarse to fine (strides
    /// 8, 4, 2, 1 for four levels). Levels not reached because pruning
    /// emptied the tensor are empty.
    pub likelihoods: Vec<SparseTensor<f32>>,
    /// Encoder feature maps, stride 1 to the latent.
    pub encoder_coords: Vec<Vec<[i32; 4]>>,
    pub tape: Option<Tape>,
}

fn lit(v: f64) -> f32 {
    v as f32
}

impl Model {
    /// Deterministic initialization from `seed`.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = Builder {
            params: Vec::new(),
            stats: Vec::new(),
            rng: &mut rng,
        };
        let w = spec.widths.clone();
        let stem = b.cbe("stem", spec.enc_kernel, spec.in_channels, w[0]);
        let mut enc = Vec::new();
        for i in 1..w.len() {
            let down = b.cbe(&format!("enc{i}.down"), spec.enc_down_kernel, w[i - 1], w[i]);
            let conv = b.cbe(&format!("enc{i}.conv"), spec.enc_kernel, w[i], w[i]);
            enc.push((down, conv));
        }
        let mut dec = Vec::new();
        for i in (1..w.len()).rev() {
            let l = i - 1;
            let up = b.cbe(&format!("dec{l}.up"), spec.dec_up_kernel, w[i], w[l]);
            let conv = b.cbe(&format!("dec{l}.conv"), spec.dec_kernel, 2 * w[l], w[l]);
            let head = b.conv(&format!("dec{l}.head"), spec.head_kernel, w[l], 1, true, 0.1);
            dec.push(DecSlots { up, conv, head });
        }
        let out = b.conv("out", spec.head_kernel, w[0], spec.out_channels, true, 0.1);
        let params = b.params;
        let bn_stats = b.stats;
        Ok(Self {
            spec,
            params,
            bn_stats,
            layout: Layout {
                stem,
                enc,
                dec,
                out,
            },
        })
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(Param::len).sum()
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    fn weights(&self, s: &ConvSlot) -> ConvWeights<f32> {
        ConvWeights {
            kernel_size: s.kernel,
            c_in: s.c_in,
            c_out: s.c_out,
            weights: self.params[s.w].data.clone(),
            bias: s.b.map(|b| self.params[b].data.clone()),
        }
    }

    fn bn_state(&self, s: &BnSlot, mode: Mode) -> BatchNormState<f32> {
        let st = &self.bn_stats[s.stats];
        BatchNormState {
            gamma: self.params[s.gamma].data.clone(),
            beta: self.params[s.beta].data.clone(),
            running_mean: st.mean.clone(),
            running_var: st.var.clone(),
            momentum: lit(0.1),
            epsilon: lit(1e-5),
            mode,
        }
    }

    fn run_cbe(
        &self,
        slot: &Cbe,
        x: &SparseTensor<f32>,
        stride: [i32; 4],
        up: bool,
        mode: Mode,
    ) -> Result<(SparseTensor<f32>, CbeTape)> {
        let w = self.weights(&slot.conv);
        let (y, conv) = if up {
            transposed_generative_conv(x, &w, stride)?
        } else {
            sparse_conv(x, &w, stride)?
        };
        let (z, bn) = self.bn_state(&slot.bn, mode).forward(y.features())?;
        let out = elu(&z);
        let t = y.with_features(out.clone(), slot.conv.c_out)?;
        Ok((t, CbeTape { conv, bn, out }))
    }

    /// Runs the network on a stride-1, 3-channel input.
    ///
    /// Train mode normalizes with per-call batch statistics and records a
    /// [`Tape`]; call [`Model::apply_bn_updates`] afterwards to move the
    /// running statistics. Eval mode never mutates the model.
    pub fn forward(
        &self,
        input: &SparseTensor<f32>,
        alpha: f32,
        mode: Mode,
    ) -> Result<ForwardPass> {
        if input.channels() != self.spec.in_channels || input.stride() != [1; 4] {
            return contract("model input must be a stride-1 tensor with 3 channels");
        }
        let levels = self.spec.levels();
        let empty_pass = |encoder_coords| ForwardPass {
            estimate: SparseTensor::empty(self.spec.out_channels, [1; 4]),
            likelihoods: (0..levels)
                .map(|l| {
                    let s = 1 << (levels - 1 - l);
                    SparseTensor::empty(1, [s, s, s, 1])
                })
                .collect(),
            encoder_coords,
            tape: None,
        };
        if input.is_empty() {
            return Ok(empty_pass(vec![Vec::new(); levels + 1]));
        }

        // encoder
        let (e0, stem) = self.run_cbe(&self.layout.stem, input, [1; 4], false, mode)?;
        let mut feats = vec![e0];
        let mut enc_tapes = Vec::new();
        for (down, conv) in &self.layout.enc {
            let (d, td) = self.run_cbe(down, feats.last().unwrap(), DOWN, false, mode)?;
            let (c, tc) = self.run_cbe(conv, &d, [1; 4], false, mode)?;
            feats.push(c);
            enc_tapes.push((td, tc));
        }
        let encoder_coords = feats.iter().map(|t| t.coords().to_vec()).collect();
        let enc_rows: Vec<usize> = feats.iter().map(SparseTensor::len).collect();

        // decoder
        let mut likelihoods = Vec::with_capacity(levels);
        let mut dec_tapes = Vec::with_capacity(levels);
        let mut d = feats[levels].clone();
        for (j, slots) in self.layout.dec.iter().enumerate() {
            let l = levels - 1 - j;
            let (u, up) = self.run_cbe(&slots.up, &d, DOWN, true, mode)?;
            let skip_src = &feats[l];
            let (cu, ce) = (u.channels(), skip_src.channels());
            let mut skip = Vec::with_capacity(u.len());
            let mut cat = Vec::with_capacity(u.len() * (cu + ce));
            for (r, c) in u.coords().iter().enumerate() {
                cat.extend_from_slice(u.row(r));
                let m = skip_src.find(c);
                match m {
                    Some(e) => cat.extend_from_slice(skip_src.row(e)),
                    None => cat.extend(std::iter::repeat(0.0).take(ce)),
                }
                skip.push(m);
            }
            let merged = u.with_features(cat, cu + ce)?;
            let (h, conv) = self.run_cbe(&slots.conv, &merged, [1; 4], false, mode)?;
            let hw = self.weights(&slots.head);
            let (logits, head) = sparse_conv(&h, &hw, [1; 4])?;
            let lik = sigmoid(logits.features());
            let lik_t = h.with_features(lik.clone(), 1)?;
            let (kept, prune_rec) = prune(&h, &lik_t, alpha)?;
            likelihoods.push(lik_t);
            dec_tapes.push(DecTape {
                up,
                up_rows: u.len(),
                skip,
                conv,
                head,
                likelihood: lik,
                prune: prune_rec,
            });
            d = kept;
            if d.is_empty() {
                break;
            }
        }
        while likelihoods.len() < levels {
            let s = 1 << (levels - 1 - likelihoods.len());
            likelihoods.push(SparseTensor::empty(1, [s, s, s, 1]));
        }

        let tape_base = |out| Tape {
            mode,
            stem: stem.clone(),
            enc: enc_tapes.clone(),
            enc_rows: enc_rows.clone(),
            dec: dec_tapes.clone(),
            out,
        };
        if d.is_empty() {
            return Ok(ForwardPass {
                likelihoods,
                tape: Some(tape_base(None)),
                ..empty_pass(encoder_coords)
            });
        }

        let ow = self.weights(&self.layout.out);
        let (o, out_conv) = sparse_conv(&d, &ow, [1; 4])?;
        let sig = sigmoid(o.features());
        let estimate_rows: Vec<usize> = o
            .coords()
            .iter()
            .enumerate()
            .filter(|(_, c)| c[3] == 0)
            .map(|(i, _)| i)
            .collect();
        let out_t = o.with_features(sig.clone(), self.spec.out_channels)?;
        let estimate = out_t.select(&estimate_rows);
        let tape = tape_base(Some(OutTape {
            conv: out_conv,
            sig,
            rows: o.len(),
            estimate_rows,
        }));
        Ok(ForwardPass {
            estimate,
            likelihoods,
            encoder_coords,
            tape: Some(tape),
        })
    }

    /// Encoder only; returns the feature maps from stride 1 to the latent.
    pub fn encode(&self, input: &SparseTensor<f32>, mode: Mode) -> Result<Vec<SparseTensor<f32>>> {
        if input.is_empty() {
            return Ok(Vec::new());
        }
        let (e0, _) = self.run_cbe(&self.layout.stem, input, [1; 4], false, mode)?;
        let mut feats = vec![e0];
        for (down, conv) in &self.layout.enc {
            let (d, _) = self.run_cbe(down, feats.last().unwrap(), DOWN, false, mode)?;
            let (c, _) = self.run_cbe(conv, &d, [1; 4], false, mode)?;
            feats.push(c);
        }
        Ok(feats)
    }

    /// Moves batch-norm running statistics using a train-mode pass.
    pub fn apply_bn_updates(&mut self, pass: &ForwardPass) {
        let Some(tape) = &pass.tape else { return };
        if tape.mode != Mode::Train {
            return;
        }
        let mut updates: Vec<(BnSlot, &BatchNormRecord<f32>)> = vec![(self.layout.stem.bn, &tape.stem.bn)];
        for ((sd, sc), (td, tc)) in self.layout.enc.iter().zip(&tape.enc) {
            updates.push((sd.bn, &td.bn));
            updates.push((sc.bn, &tc.bn));
        }
        for (slots, t) in self.layout.dec.iter().zip(&tape.dec) {
            updates.push((slots.up.bn, &t.up.bn));
            updates.push((slots.conv.bn, &t.conv.bn));
        }
        for (slot, rec) in updates {
            let mut st = self.bn_state(&slot, Mode::Train);
            st.update_running(rec);
            let s = &mut self.bn_stats[slot.stats];
            s.mean = st.running_mean;
            s.var = st.running_var;
        }
    }

    fn cbe_backward(
        &self,
        slot: &Cbe,
        tape: &CbeTape,
        grad_out: &[f32],
        grads: &mut [Vec<f32>],
    ) -> Vec<f32> {
        let g = elu_backward(&tape.out, grad_out);
        let bn = self.bn_state(&slot.bn, tape.bn.mode);
        let (gx, ggamma, gbeta) = bn.backward(&tape.bn, &g);
        add(&mut grads[slot.bn.gamma], &ggamma);
        add(&mut grads[slot.bn.beta], &gbeta);
        self.conv_grads(&slot.conv, &tape.conv, &gx, grads)
    }

    fn conv_grads(
        &self,
        slot: &ConvSlot,
        rec: &ConvRecord<f32>,
        grad_out: &[f32],
        grads: &mut [Vec<f32>],
    ) -> Vec<f32> {
        let cg = conv_backward(rec, &self.weights(slot), grad_out);
        add(&mut grads[slot.w], &cg.weights);
        if let (Some(b), Some(gb)) = (slot.b, cg.bias) {
            add(&mut grads[b], &gb);
        }
        cg.input
    }

    /// Parameter gradients given the gradient of the loss with respect to
    /// each level's likelihood values and to the estimate's features.
    pub fn backward(
        &self,
        pass: &ForwardPass,
        likelihood_grads: &[Vec<f32>],
        estimate_grad: &[f32],
    ) -> Result<Vec<Vec<f32>>> {
        let Some(tape) = &pass.tape else {
            return contract("backward needs a recorded forward pass");
        };
        if likelihood_grads.len() != self.spec.levels() {
            return contract("one likelihood gradient per decoder level is required");
        }
        let mut grads: Vec<Vec<f32>> = self.params.iter().map(|p| vec![0.0; p.len()]).collect();
        let levels = self.spec.levels();
        let w = &self.spec.widths;
        let mut enc_grads: Vec<Vec<f32>> = tape
            .enc_rows
            .iter()
            .zip(w)
            .map(|(&n, &c)| vec![0.0; n * c])
            .collect();

        // output head
        let mut g_d: Vec<f32> = match &tape.out {
            Some(out) => {
                let co = self.spec.out_channels;
                if estimate_grad.len() != out.estimate_rows.len() * co {
                    return contract("estimate gradient does not match the estimate");
                }
                let mut g = vec![0.0; out.rows * co];
                for (e, &r) in out.estimate_rows.iter().enumerate() {
                    g[r * co..(r + 1) * co].copy_from_slice(&estimate_grad[e * co..(e + 1) * co]);
                }
                let g = sigmoid_backward(&out.sig, &g);
                self.conv_grads(&self.layout.out, &out.conv, &g, &mut grads)
            }
            None => Vec::new(),
        };

        // decoder, fine to coarse
        for j in (0..tape.dec.len()).rev() {
            let l = levels - 1 - j;
            let slots = &self.layout.dec[j];
            let t = &tape.dec[j];
            let c = w[l];
            let mut g_h = if g_d.is_empty() {
                vec![0.0; t.prune.n_in * c]
            } else {
                prune_backward(&t.prune, c, &g_d)
            };
            if likelihood_grads[j].len() != t.likelihood.len() {
                return contract(format!("likelihood gradient for level {j} has wrong length"));
            }
            let g_logit = sigmoid_backward(&t.likelihood, &likelihood_grads[j]);
            let g_head = self.conv_grads(&slots.head, &t.head, &g_logit, &mut grads);
            add(&mut g_h, &g_head);
            let g_cat = self.cbe_backward(&slots.conv, &t.conv, &g_h, &mut grads);
            let cu = c;
            let ce = w[l];
            let mut g_u = Vec::with_capacity(t.up_rows * cu);
            for (r, m) in t.skip.iter().enumerate() {
                let row = &g_cat[r * (cu + ce)..(r + 1) * (cu + ce)];
                g_u.extend_from_slice(&row[..cu]);
                if let Some(e) = m {
                    let dst = &mut enc_grads[l][e * ce..(e + 1) * ce];
                    for (a, b) in dst.iter_mut().zip(&row[cu..]) {
                        *a += *b;
                    }
                }
            }
            g_d = self.cbe_backward(&slots.up, &t.up, &g_u, &mut grads);
        }
        if !tape.dec.is_empty() {
            add(&mut enc_grads[levels], &g_d);
        }

        // encoder, deep to shallow
        for i in (1..=levels).rev() {
            let (sd, sc) = &self.layout.enc[i - 1];
            let (td, tc) = &tape.enc[i - 1];
            let g = self.cbe_backward(sc, tc, &enc_grads[i], &mut grads);
            let g = self.cbe_backward(sd, td, &g, &mut grads);
            add(&mut enc_grads[i - 1], &g);
        }
        self.cbe_backward(&self.layout.stem, &tape.stem, &enc_grads[0], &mut grads);
        Ok(grads)
    }
}

fn add(dst: &mut [f32], src: &[f32]) {
    for (a, b) in dst.iter_mut().zip(src) {
        *a += *b;
    }
}
