//! Masked patch autoencoder: forward pass, loss and backward pass.
//!
//! The encoder sees CLS followed by the visible patches (EOS included). CLS
//! takes position 0 and sequence patch `t` takes position `t + 1`, in both
//! stacks. The decoder sees the projected CLS state, projected visible
//! states and a shared mask token at every masked position.

use super::config::ModelConfig;
use super::ops::{
    add_assign, attention, attention_backward, gelu, gelu_backward, layer_norm, layer_norm_backward, linear,
    linear_backward, AttnCache, NormCache,
};
use super::params::{Block, LayerNorm, Params};
use crate::error::{Error, Result};
use crate::masking::{normalize_targets, patch_unit, sinusoidal_positions, MaskPlan, TARGET_EPSILON};
use crate::render::{Patch, PatchSequence, MAX_PATCHES, PATCH_PIXELS};
use crate::scalar::Scalar;

/// Rows in the position tables: CLS plus the longest sequence.
pub const POSITIONS: usize = MAX_PATCHES + 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub params: Params<T>,
    enc_pos: Vec<T>,
    dec_pos: Vec<T>,
}

/// Loss and predictions for the masked patches, in ascending patch order.
#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction<T> {
    pub loss: T,
    pub masked: Vec<usize>,
    /// `masked.len() x 256`, in target space.
    pub predictions: Vec<T>,
}

impl<T: Scalar> Model<T> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = Params::init(&config, seed);
        Self::from_params(config, params)
    }

    pub fn from_params(config: ModelConfig, params: Params<T>) -> Result<Self> {
        config.validate()?;
        let enc_pos = sinusoidal_positions(POSITIONS, config.hidden)?;
        let dec_pos = sinusoidal_positions(POSITIONS, config.decoder_hidden)?;
        Ok(Model { config, params, enc_pos, dec_pos })
    }

    pub fn forward_loss(&self, seq: &PatchSequence, plan: &MaskPlan) -> Result<Reconstruction<T>> {
        self.forward_loss_targets(seq.patches(), seq.patches(), plan)
    }

    /// Like [`Model::forward_loss`] but reconstructs `targets` while encoding
    /// `inputs`. Both are full sequences ending in EOS.
    pub fn forward_loss_targets(&self, inputs: &[Patch], targets: &[Patch], plan: &MaskPlan) -> Result<Reconstruction<T>> {
        let batch = Batch::prepare(self, inputs, targets, plan)?;
        let (rec, _) = self.run(&self.params, &batch, false);
        Ok(rec)
    }

    /// Loss, predictions and the gradient of the loss for every parameter.
    pub fn loss_and_grad(&self, seq: &PatchSequence, plan: &MaskPlan) -> Result<(Reconstruction<T>, Params<T>)> {
        self.loss_and_grad_targets(seq.patches(), seq.patches(), plan)
    }

    pub fn loss_and_grad_targets(
        &self,
        inputs: &[Patch],
        targets: &[Patch],
        plan: &MaskPlan,
    ) -> Result<(Reconstruction<T>, Params<T>)> {
        let batch = Batch::prepare(self, inputs, targets, plan)?;
        let (rec, grads) = self.run(&self.params, &batch, true);
        Ok((rec, grads.expect("gradients requested")))
    }

    pub(crate) fn loss_with(&self, params: &Params<T>, seq: &PatchSequence, plan: &MaskPlan) -> Result<T> {
        let batch = Batch::prepare(self, seq.patches(), seq.patches(), plan)?;
        Ok(self.run(params, &batch, false).0.loss)
    }

    /// Encoder hidden states without masking: layer 0 is the embedded input
    /// with positions, layer `l` the output of block `l`. Each layer is
    /// `(1 + patches) x hidden`, CLS first.
    pub fn encode_layers(&self, seq: &PatchSequence) -> Result<Vec<Vec<T>>> {
        let patches = seq.patches();
        check_len(patches.len())?;
        let visible: Vec<usize> = (0..patches.len()).collect();
        let inputs: Vec<Vec<T>> = patches.iter().map(patch_unit).collect();
        let mut x = self.embed(&self.params, &inputs, &visible);
        let rows = visible.len() + 1;
        let mut layers = vec![x.clone()];
        for b in &self.params.encoder {
            x = block_forward(x, rows, b, self.config.layer_norm).0;
            layers.push(x.clone());
        }
        Ok(layers)
    }

    fn embed(&self, params: &Params<T>, inputs: &[Vec<T>], visible: &[usize]) -> Vec<T> {
        let h = self.config.hidden;
        let flat: Vec<T> = visible.iter().flat_map(|&t| inputs[t].iter().copied()).collect();
        let proj = linear(&flat, visible.len(), &params.patch_embed);
        let mut x = Vec::with_capacity((visible.len() + 1) * h);
        x.extend(params.cls.data.iter().zip(&self.enc_pos[..h]).map(|(a, b)| *a + *b));
        for (r, &t) in visible.iter().enumerate() {
            let pos = &self.enc_pos[(t + 1) * h..(t + 2) * h];
            x.extend(proj[r * h..(r + 1) * h].iter().zip(pos).map(|(a, b)| *a + *b));
        }
        x
    }

    fn run(&self, params: &Params<T>, batch: &Batch<T>, want_grad: bool) -> (Reconstruction<T>, Option<Params<T>>) {
        let cfg = &self.config;
        let (h, dh) = (cfg.hidden, cfg.decoder_hidden);
        let ln = cfg.layer_norm;
        let n = batch.inputs.len();
        let visible = &batch.visible;
        let enc_rows = visible.len() + 1;

        let mut x = self.embed(params, &batch.inputs, visible);
        let mut enc_caches = Vec::with_capacity(params.encoder.len());
        for b in &params.encoder {
            let (y, c) = block_forward(x, enc_rows, b, ln);
            enc_caches.push(c);
            x = y;
        }
        let (z, enc_norm_cache) = norm_forward(&x, enc_rows, &params.encoder_norm, ln);
        let dz = linear(&z, enc_rows, &params.decoder_embed);

        let dec_rows = n + 1;
        let mut slot = vec![None; n];
        for (r, &t) in visible.iter().enumerate() {
            slot[t] = Some(r + 1);
        }
        let mut d = Vec::with_capacity(dec_rows * dh);
        for row in 0..dec_rows {
            let src = if row == 0 { Some(0) } else { slot[row - 1] };
            let base = match src {
                Some(r) => &dz[r * dh..(r + 1) * dh],
                None => &params.mask_token.data[..],
            };
            let pos = &self.dec_pos[row * dh..(row + 1) * dh];
            d.extend(base.iter().zip(pos).map(|(a, b)| *a + *b));
        }
        let mut dec_caches = Vec::with_capacity(params.decoder.len());
        for b in &params.decoder {
            let (y, c) = block_forward(d, dec_rows, b, ln);
            dec_caches.push(c);
            d = y;
        }
        let (u, dec_norm_cache) = norm_forward(&d, dec_rows, &params.decoder_norm, ln);
        let m = batch.masked.len();
        let gathered: Vec<T> = batch.masked.iter().flat_map(|&t| u[(t + 1) * dh..(t + 2) * dh].iter().copied()).collect();
        let pred = linear(&gathered, m, &params.head);

        let denom = T::of_usize(m * PATCH_PIXELS);
        let loss = pred.iter().zip(&batch.targets).map(|(p, t)| (*p - *t) * (*p - *t)).sum::<T>() / denom;
        let rec = Reconstruction { loss, masked: batch.masked.clone(), predictions: pred.clone() };
        if !want_grad {
            return (rec, None);
        }

        let mut g = params.zeros_like();
        let two = T::of(2.0);
        let dpred: Vec<T> = pred.iter().zip(&batch.targets).map(|(p, t)| two * (*p - *t) / denom).collect();
        let dgathered = linear_backward(&gathered, m, &params.head, &dpred, &mut g.head);
        let mut du = vec![T::zero(); dec_rows * dh];
        for (i, &t) in batch.masked.iter().enumerate() {
            du[(t + 1) * dh..(t + 2) * dh].copy_from_slice(&dgathered[i * dh..(i + 1) * dh]);
        }
        let mut dd = norm_backward(dec_norm_cache.as_ref(), dec_rows, &params.decoder_norm, du, &mut g.decoder_norm);
        for (i, c) in dec_caches.iter().enumerate().rev() {
            dd = block_backward(c, dec_rows, &params.decoder[i], dd, &mut g.decoder[i]);
        }
        let mut ddz = vec![T::zero(); enc_rows * dh];
        for row in 0..dec_rows {
            let src = if row == 0 { Some(0) } else { slot[row - 1] };
            let grad = &dd[row * dh..(row + 1) * dh];
            match src {
                Some(r) => add_assign(&mut ddz[r * dh..(r + 1) * dh], grad),
                None => add_assign(&mut g.mask_token.data, grad),
            }
        }
        let dzn = linear_backward(&z, enc_rows, &params.decoder_embed, &ddz, &mut g.decoder_embed);
        let mut dx = norm_backward(enc_norm_cache.as_ref(), enc_rows, &params.encoder_norm, dzn, &mut g.encoder_norm);
        for (i, c) in enc_caches.iter().enumerate().rev() {
            dx = block_backward(c, enc_rows, &params.encoder[i], dx, &mut g.encoder[i]);
        }
        add_assign(&mut g.cls.data, &dx[..h]);
        let flat: Vec<T> = visible.iter().flat_map(|&t| batch.inputs[t].iter().copied()).collect();
        linear_backward(&flat, visible.len(), &params.patch_embed, &dx[h..], &mut g.patch_embed);
        (rec, Some(g))
    }
}

fn check_len(n: usize) -> Result<()> {
    if n == 0 || n > MAX_PATCHES {
        return Err(Error::precondition(format!("sequence of {n} patches outside 1..={MAX_PATCHES}")));
    }
    Ok(())
}

/// Model-ready view of one sequence and its mask.
struct Batch<T> {
    inputs: Vec<Vec<T>>,
    visible: Vec<usize>,
    masked: Vec<usize>,
    /// `masked.len() x 256`.
    targets: Vec<T>,
}

impl<T: Scalar> Batch<T> {
    fn prepare(model: &Model<T>, inputs: &[Patch], targets: &[Patch], plan: &MaskPlan) -> Result<Self> {
        check_len(inputs.len())?;
        if targets.len() != inputs.len() {
            return Err(Error::precondition("inputs and targets differ in length"));
        }
        let content = inputs.len() - 1;
        if plan.n() != content {
            return Err(Error::precondition(format!(
                "mask plan covers {} patches but the sequence has {content} content patches",
                plan.n()
            )));
        }
        if plan.masked_count() == 0 {
            return Err(Error::precondition("mask plan masks no patch; the loss is undefined"));
        }
        let mask = plan.mask_vector();
        let visible = (0..inputs.len()).filter(|&t| t == content || !mask[t]).collect();
        let masked = plan.masked();
        let eps = T::of(TARGET_EPSILON);
        let targets =
            masked.iter().flat_map(|&t| normalize_targets::<T>(&targets[t], model.config.target_norm, eps).0).collect();
        Ok(Batch { inputs: inputs.iter().map(patch_unit).collect(), visible, masked, targets })
    }
}

fn norm_forward<T: Scalar>(x: &[T], rows: usize, ln: &LayerNorm<T>, enabled: bool) -> (Vec<T>, Option<NormCache<T>>) {
    if enabled {
        let (y, c) = layer_norm(x, rows, ln);
        (y, Some(c))
    } else {
        (x.to_vec(), None)
    }
}

fn norm_backward<T: Scalar>(
    cache: Option<&NormCache<T>>,
    rows: usize,
    ln: &LayerNorm<T>,
    dy: Vec<T>,
    g: &mut LayerNorm<T>,
) -> Vec<T> {
    match cache {
        Some(c) => layer_norm_backward(c, rows, ln, &dy, g),
        None => dy,
    }
}

struct BlockCache<T> {
    h1: Vec<T>,
    n1: Option<NormCache<T>>,
    q: Vec<T>,
    k: Vec<T>,
    v: Vec<T>,
    attn: AttnCache<T>,
    a: Vec<T>,
    h2: Vec<T>,
    n2: Option<NormCache<T>>,
    m: Vec<T>,
    g: Vec<T>,
}

fn block_forward<T: Scalar>(x: Vec<T>, rows: usize, b: &Block<T>, ln: bool) -> (Vec<T>, BlockCache<T>) {
    let dim = b.query.out_dim();
    let (h1, n1) = norm_forward(&x, rows, &b.norm1, ln);
    let q = linear(&h1, rows, &b.query);
    let k = linear(&h1, rows, &b.key);
    let v = linear(&h1, rows, &b.value);
    let (a, attn) = attention(&q, &k, &v, rows, dim, b.heads);
    let o = linear(&a, rows, &b.attn_out);
    let mut x2 = x;
    add_assign(&mut x2, &o);
    let (h2, n2) = norm_forward(&x2, rows, &b.norm2, ln);
    let m = linear(&h2, rows, &b.mlp_in);
    let g = gelu(&m);
    let f = linear(&g, rows, &b.mlp_out);
    add_assign(&mut x2, &f);
    (x2, BlockCache { h1, n1, q, k, v, attn, a, h2, n2, m, g })
}

fn block_backward<T: Scalar>(c: &BlockCache<T>, rows: usize, b: &Block<T>, dy: Vec<T>, g: &mut Block<T>) -> Vec<T> {
    let dim = b.query.out_dim();
    let dg = linear_backward(&c.g, rows, &b.mlp_out, &dy, &mut g.mlp_out);
    let dm = gelu_backward(&c.m, &dg);
    let dh2 = linear_backward(&c.h2, rows, &b.mlp_in, &dm, &mut g.mlp_in);
    let mut dx2 = dy;
    add_assign(&mut dx2, &norm_backward(c.n2.as_ref(), rows, &b.norm2, dh2, &mut g.norm2));
    let da = linear_backward(&c.a, rows, &b.attn_out, &dx2, &mut g.attn_out);
    let (dq, dk, dv) = attention_backward(&c.q, &c.k, &c.v, &c.attn, rows, dim, b.heads, &da);
    let mut dh1 = linear_backward(&c.h1, rows, &b.query, &dq, &mut g.query);
    add_assign(&mut dh1, &linear_backward(&c.h1, rows, &b.key, &dk, &mut g.key));
    add_assign(&mut dh1, &linear_backward(&c.h1, rows, &b.value, &dv, &mut g.value));
    let dn1 = norm_backward(c.n1.as_ref(), rows, &b.norm1, dh1, &mut g.norm1);
    let mut dx = dx2;
    add_assign(&mut dx, &dn1);
    dx
}
