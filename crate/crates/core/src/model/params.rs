//! Parameter tensors. Weights are `[out, in]` row-major; initialisation is
//! `N(0, 1/fan_in)` for matrices, `N(0, 0.02²)` for the CLS and mask tokens,
//! ones/zeros for layer-norm gain/shift, and zero biases.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use crate::masking::rng_stream;
use crate::scalar::Scalar;

const TOKEN_INIT_STD: f64 = 0.02;

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    pub shape: Vec<usize>,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![T::zero(); shape.iter().product()] }
    }

    pub fn filled(shape: &[usize], v: T) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![v; shape.iter().product()] }
    }

    fn normal<R: Rng>(shape: &[usize], std: f64, rng: &mut R) -> Self {
        let dist = Normal::new(0.0, std).expect("positive std");
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: (0..n).map(|_| T::of(dist.sample(rng))).collect() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Linear<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Linear<T> {
    fn init<R: Rng>(inp: usize, out: usize, rng: &mut R) -> Self {
        Linear {
            weight: Tensor::normal(&[out, inp], (1.0 / inp as f64).sqrt(), rng),
            bias: Tensor::zeros(&[out]),
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weight.shape[0]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerNorm<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

impl<T: Scalar> LayerNorm<T> {
    fn init(dim: usize) -> Self {
        LayerNorm { gamma: Tensor::filled(&[dim], T::one()), beta: Tensor::zeros(&[dim]) }
    }
}

/// Pre-norm transformer block.
#[derive(Clone, Debug, PartialEq)]
pub struct Block<T> {
    pub norm1: LayerNorm<T>,
    pub query: Linear<T>,
    pub key: Linear<T>,
    pub value: Linear<T>,
    pub attn_out: Linear<T>,
    pub norm2: LayerNorm<T>,
    pub mlp_in: Linear<T>,
    pub mlp_out: Linear<T>,
    pub heads: usize,
}

impl<T: Scalar> Block<T> {
    fn init<R: Rng>(dim: usize, mlp: usize, heads: usize, rng: &mut R) -> Self {
        Block {
            norm1: LayerNorm::init(dim),
            query: Linear::init(dim, dim, rng),
            key: Linear::init(dim, dim, rng),
            value: Linear::init(dim, dim, rng),
            attn_out: Linear::init(dim, dim, rng),
            norm2: LayerNorm::init(dim),
            mlp_in: Linear::init(dim, mlp, rng),
            mlp_out: Linear::init(mlp, dim, rng),
            heads,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Params<T> {
    pub patch_embed: Linear<T>,
    pub cls: Tensor<T>,
    pub encoder: Vec<Block<T>>,
    pub encoder_norm: LayerNorm<T>,
    pub decoder_embed: Linear<T>,
    pub mask_token: Tensor<T>,
    pub decoder: Vec<Block<T>>,
    pub decoder_norm: LayerNorm<T>,
    pub head: Linear<T>,
}

impl<T: Scalar> Params<T> {
    /// Deterministic initialisation from `seed`.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Self {
        let mut rng = rng_stream(seed, 0);
        let (h, dh) = (cfg.hidden, cfg.decoder_hidden);
        Params {
            patch_embed: Linear::init(cfg.patch_dim, h, &mut rng),
            cls: Tensor::normal(&[h], TOKEN_INIT_STD, &mut rng),
            encoder: (0..cfg.enc_layers).map(|_| Block::init(h, cfg.mlp, cfg.heads, &mut rng)).collect(),
            encoder_norm: LayerNorm::init(h),
            decoder_embed: Linear::init(h, dh, &mut rng),
            mask_token: Tensor::normal(&[dh], TOKEN_INIT_STD, &mut rng),
            decoder: (0..cfg.dec_layers)
                .map(|_| Block::init(dh, cfg.decoder_mlp, cfg.decoder_heads, &mut rng))
                .collect(),
            decoder_norm: LayerNorm::init(dh),
            head: Linear::init(dh, cfg.patch_dim, &mut rng),
        }
    }

    /// All-zero parameters of the same shapes, used as gradient buffers.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v = T::zero());
        }
        z
    }

    /// Named tensors in a fixed order shared with [`Params::tensors_mut`].
    pub fn tensors(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out = Vec::new();
        self.patch_embed.push(String::from("patch_embed"), &mut out);
        out.push((String::from("cls"), &self.cls));
        for (i, b) in self.encoder.iter().enumerate() {
            b.push(format!("encoder.{i}"), &mut out);
        }
        self.encoder_norm.push(String::from("encoder_norm"), &mut out);
        self.decoder_embed.push(String::from("decoder_embed"), &mut out);
        out.push((String::from("mask_token"), &self.mask_token));
        for (i, b) in self.decoder.iter().enumerate() {
            b.push(format!("decoder.{i}"), &mut out);
        }
        self.decoder_norm.push(String::from("decoder_norm"), &mut out);
        self.head.push(String::from("head"), &mut out);
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        self.patch_embed.push_mut(&mut out);
        out.push(&mut self.cls);
        for b in &mut self.encoder {
            b.push_mut(&mut out);
        }
        self.encoder_norm.push_mut(&mut out);
        self.decoder_embed.push_mut(&mut out);
        out.push(&mut self.mask_token);
        for b in &mut self.decoder {
            b.push_mut(&mut out);
        }
        self.decoder_norm.push_mut(&mut out);
        self.head.push_mut(&mut out);
        out
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Parameters of the patch projection, CLS, encoder blocks and final
    /// encoder norm, counted from the instantiated tensors.
    pub fn encoder_count(&self) -> usize {
        self.tensors()
            .iter()
            .filter(|(n, _)| n == "cls" || ["patch_embed.", "encoder."].iter().any(|p| n.starts_with(p)) || n.starts_with("encoder_norm."))
            .map(|(_, t)| t.len())
            .sum()
    }
}

impl<T> Linear<T> {
    fn push<'a>(&'a self, name: String, out: &mut Vec<(String, &'a Tensor<T>)>) {
        out.push((format!("{name}.weight"), &self.weight));
        out.push((format!("{name}.bias"), &self.bias));
    }

    fn push_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor<T>>) {
        out.push(&mut self.weight);
        out.push(&mut self.bias);
    }
}

impl<T> LayerNorm<T> {
    fn push<'a>(&'a self, name: String, out: &mut Vec<(String, &'a Tensor<T>)>) {
        out.push((format!("{name}.gamma"), &self.gamma));
        out.push((format!("{name}.beta"), &self.beta));
    }

    fn push_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor<T>>) {
        out.push(&mut self.gamma);
        out.push(&mut self.beta);
    }
}

impl<T> Block<T> {
    fn push<'a>(&'a self, name: String, out: &mut Vec<(String, &'a Tensor<T>)>) {
        self.norm1.push(format!("{name}.norm1"), out);
        self.query.push(format!("{name}.query"), out);
        self.key.push(format!("{name}.key"), out);
        self.value.push(format!("{name}.value"), out);
        self.attn_out.push(format!("{name}.attn_out"), out);
        self.norm2.push(format!("{name}.norm2"), out);
        self.mlp_in.push(format!("{name}.mlp_in"), out);
        self.mlp_out.push(format!("{name}.mlp_out"), out);
    }

    fn push_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor<T>>) {
        self.norm1.push_mut(out);
        self.query.push_mut(out);
        self.key.push_mut(out);
        self.value.push_mut(out);
        self.attn_out.push_mut(out);
        self.norm2.push_mut(out);
        self.mlp_in.push_mut(out);
        self.mlp_out.push_mut(out);
    }
}
