//! Single-threaded Adam training on span-masked sequences.
//!
//! Streams of the training seed: 1 picks sequences, 2 draws mask plans.
//! Parameter initialisation uses stream 0 of the model seed.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mae::Model;
use super::params::Params;
use crate::corpus::render_all;
use crate::error::{Error, Result};
use crate::masking::{rng_stream, sample_span_mask_with, MaskConfig, MaskPlan};
use crate::raster::FontAtlas;
use crate::render::{PatchSequence, RenderConfig, Strategy};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

pub struct Adam<T> {
    cfg: AdamConfig,
    m: Params<T>,
    v: Params<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(cfg: AdamConfig, params: &Params<T>) -> Self {
        Adam { cfg, m: params.zeros_like(), v: params.zeros_like(), t: 0 }
    }

    pub fn step(&mut self, params: &mut Params<T>, grads: &Params<T>) {
        self.t += 1;
        let (b1, b2) = (T::of(self.cfg.beta1), T::of(self.cfg.beta2));
        let lr = T::of(self.cfg.lr);
        let eps = T::of(self.cfg.epsilon);
        let c1 = T::one() - b1.powi(self.t);
        let c2 = T::one() - b2.powi(self.t);
        let grads = grads.tensors();
        for (((p, (_, g)), m), v) in params.tensors_mut().into_iter().zip(grads).zip(self.m.tensors_mut()).zip(self.v.tensors_mut()) {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = b1 * m.data[i] + (T::one() - b1) * gi;
                v.data[i] = b2 * v.data[i] + (T::one() - b2) * gi * gi;
                let mh = m.data[i] / c1;
                let vh = v.data[i] / c2;
                p.data[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    /// Sequences per step; a batch at least as large as the corpus takes
    /// every sequence in corpus order.
    pub batch_size: usize,
    pub seed: u64,
    pub mask: MaskConfig,
    pub adam: AdamConfig,
    /// Draw one mask plan per sequence up front and reuse it every step.
    pub fixed_masks: bool,
    /// Rendering threads; training itself is single-threaded.
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 100,
            batch_size: 8,
            seed: 0,
            mask: MaskConfig::default(),
            adam: AdamConfig::default(),
            fixed_masks: false,
            workers: 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub step: usize,
    /// Mean masked-reconstruction loss over the batch, before the update.
    pub loss: f64,
    pub masked_patches: usize,
    pub strategy: Strategy,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub records: Vec<TrainRecord>,
    /// Corpus lines skipped because they rendered to no content patch.
    pub skipped_lines: usize,
}

/// Renders `lines` and trains `model` in place.
pub fn train_steps<T: Scalar, S: AsRef<str> + Sync>(
    model: &mut Model<T>,
    lines: &[S],
    render_cfg: &RenderConfig,
    font: &FontAtlas,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    let rendered = render_all(lines, render_cfg, font, cfg.workers.max(1))?;
    let total = rendered.len();
    let seqs: Vec<PatchSequence> = rendered.into_iter().filter(|s| s.content_len() > 0).collect();
    let skipped_lines = total - seqs.len();
    let records = train_on(model, &seqs, render_cfg.strategy, cfg)?;
    Ok(TrainReport { records, skipped_lines })
}

/// Trains on pre-rendered sequences, each with at least one content patch.
pub fn train_on<T: Scalar>(
    model: &mut Model<T>,
    seqs: &[PatchSequence],
    strategy: Strategy,
    cfg: &TrainConfig,
) -> Result<Vec<TrainRecord>> {
    if seqs.is_empty() {
        return Err(Error::precondition("training corpus has no sequence with content"));
    }
    if seqs.iter().any(|s| s.content_len() == 0) {
        return Err(Error::precondition("training sequence without content patches"));
    }
    cfg.mask.validate()?;
    if cfg.mask.ratio <= 0.0 {
        return Err(Error::precondition("training needs a positive mask ratio"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::precondition("batch_size must be at least 1"));
    }
    let mut pick = rng_stream(cfg.seed, 1);
    let mut masks = rng_stream(cfg.seed, 2);
    let fixed: Vec<MaskPlan> = if cfg.fixed_masks {
        seqs.iter().map(|s| sample_span_mask_with(s.content_len(), &cfg.mask, &mut masks)).collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let mut adam = Adam::new(cfg.adam, &model.params);
    let mut records = Vec::with_capacity(cfg.steps);
    for step in 1..=cfg.steps {
        let batch: Vec<usize> = if cfg.batch_size >= seqs.len() {
            (0..seqs.len()).collect()
        } else {
            (0..cfg.batch_size).map(|_| pick.random_range(0..seqs.len())).collect()
        };
        let scale = T::one() / T::of_usize(batch.len());
        let mut grads = model.params.zeros_like();
        let mut loss = 0.0;
        let mut masked_patches = 0;
        for &i in &batch {
            let plan = if cfg.fixed_masks {
                fixed[i].clone()
            } else {
                sample_span_mask_with(seqs[i].content_len(), &cfg.mask, &mut masks)?
            };
            let (rec, g) = model.loss_and_grad(&seqs[i], &plan)?;
            loss += rec.loss.as_f64();
            masked_patches += plan.masked_count();
            for (acc, (_, gi)) in grads.tensors_mut().into_iter().zip(g.tensors()) {
                for (a, b) in acc.data.iter_mut().zip(&gi.data) {
                    *a += *b * scale;
                }
            }
        }
        adam.step(&mut model.params, &grads);
        records.push(TrainRecord { step, loss: loss / batch.len() as f64, masked_patches, strategy });
    }
    Ok(records)
}

/// Trailing moving average of the losses over `window` steps.
pub fn smoothed_losses(records: &[TrainRecord], window: usize) -> Vec<f64> {
    let window = window.max(1);
    let mut out = Vec::with_capacity(records.len());
    let mut sum = 0.0;
    for (i, r) in records.iter().enumerate() {
        sum += r.loss;
        if i >= window {
            sum -= records[i - window].loss;
        }
        out.push(sum / (i + 1).min(window) as f64);
    }
    out
}

/// Training log with header `step,loss,masked_patches`.
pub fn write_log_csv<W: Write>(records: &[TrainRecord], mut w: W) -> Result<()> {
    writeln!(w, "step,loss,masked_patches")?;
    for r in records {
        writeln!(w, "{},{},{}", r.step, r.loss, r.masked_patches)?;
    }
    Ok(())
}
