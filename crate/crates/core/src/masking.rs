//! Span masking, fixed sinusoidal positions and per-patch target
//! normalisation for the masked patch autoencoder.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with a
//! 64-bit seed; independent streams of one seed are selected with
//! `set_stream`, so plans are reproducible from `(seed, stream)` alone.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::{Patch, PATCH_PIXELS};
use crate::scalar::Scalar;

pub const MASK_RATIO: f64 = 0.25;
pub const MAX_SPAN: usize = 6;
pub const TARGET_EPSILON: f64 = 1e-6;

/// Consecutive draws without progress before the run limit is waived. Only
/// reachable when the ratio leaves no room for gaps between runs.
const MAX_REJECTS: usize = 64;

/// Stream `stream` of the generator seeded by `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskConfig {
    pub ratio: f64,
    pub max_span: usize,
    pub seed: u64,
}

impl Default for MaskConfig {
    fn default() -> Self {
        MaskConfig { ratio: MASK_RATIO, max_span: MAX_SPAN, seed: 0 }
    }
}

impl MaskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.ratio) {
            return Err(Error::precondition(format!("mask ratio {} outside [0, 1]", self.ratio)));
        }
        if self.max_span == 0 {
            return Err(Error::precondition("max_span must be at least 1"));
        }
        Ok(())
    }

    /// Minimum number of masked patches for `n` content patches.
    pub fn target(&self, n: usize) -> usize {
        // The small slack keeps e.g. 0.15 * 20 from rounding up to 4.
        ((self.ratio * n as f64) - 1e-9).ceil().max(0.0) as usize
    }
}

/// Masked content-patch indices, stored as maximal runs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaskPlan {
    n: usize,
    seed: u64,
    spans: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct MaskPlanJson {
    seed: u64,
    n: usize,
    spans: Vec<[usize; 2]>,
}

impl MaskPlan {
    /// Builds a plan from explicit masked indices.
    pub fn from_indices(n: usize, seed: u64, indices: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut mask = vec![false; n];
        for i in indices {
            *mask
                .get_mut(i)
                .ok_or_else(|| Error::precondition(format!("mask index {i} outside {n} patches")))? = true;
        }
        Ok(MaskPlan { n, seed, spans: runs(&mask) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `(start, length)` of each maximal masked run, ascending.
    pub fn spans(&self) -> &[(usize, usize)] {
        &self.spans
    }

    pub fn masked(&self) -> Vec<usize> {
        self.spans.iter().flat_map(|&(s, l)| s..s + l).collect()
    }

    pub fn masked_count(&self) -> usize {
        self.spans.iter().map(|s| s.1).sum()
    }

    pub fn is_masked(&self, i: usize) -> bool {
        self.spans.iter().any(|&(s, l)| (s..s + l).contains(&i))
    }

    pub fn mask_vector(&self) -> Vec<bool> {
        let mut m = vec![false; self.n];
        for i in self.masked() {
            m[i] = true;
        }
        m
    }

    pub fn to_json(&self) -> String {
        let j = MaskPlanJson { seed: self.seed, n: self.n, spans: self.spans.iter().map(|&(s, l)| [s, l]).collect() };
        serde_json::to_string(&j).expect("plan serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: MaskPlanJson = serde_json::from_str(text)?;
        let indices = j.spans.iter().flat_map(|&[s, l]| s..s + l);
        Self::from_indices(j.n, j.seed, indices)
    }
}

fn runs(mask: &[bool]) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut i = 0;
    while i < mask.len() {
        if mask[i] {
            let start = i;
            while i < mask.len() && mask[i] {
                i += 1;
            }
            spans.push((start, i - start));
        } else {
            i += 1;
        }
    }
    spans
}

/// Span mask over `n` content patches drawn from `cfg.seed`.
pub fn sample_span_mask(n: usize, cfg: &MaskConfig) -> Result<MaskPlan> {
    let mut rng = rng_stream(cfg.seed, 0);
    sample_span_mask_with(n, cfg, &mut rng)
}

/// Draws span lengths uniformly from `[1, max_span]` and starts uniformly
/// from `[0, n - length]` until at least `ceil(ratio * n)` patches are
/// masked. Draws whose merged run with neighbouring masked patches would
/// exceed `max_span` are redrawn.
pub fn sample_span_mask_with<R: Rng + ?Sized>(n: usize, cfg: &MaskConfig, rng: &mut R) -> Result<MaskPlan> {
    cfg.validate()?;
    if n == 0 {
        return Err(Error::precondition("span masking needs at least one content patch"));
    }
    let target = cfg.target(n);
    let mut mask = vec![false; n];
    let mut count = 0;
    let mut rejects = 0;
    while count < target {
        let len = rng.random_range(1..=cfg.max_span.min(n));
        let start = rng.random_range(0..=n - len);
        let mut lo = start;
        while lo > 0 && mask[lo - 1] {
            lo -= 1;
        }
        let mut hi = start + len;
        while hi < n && mask[hi] {
            hi += 1;
        }
        if hi - lo > cfg.max_span && rejects < MAX_REJECTS {
            rejects += 1;
            continue;
        }
        let before = count;
        for m in &mut mask[start..start + len] {
            count += usize::from(!*m);
            *m = true;
        }
        rejects = if count > before { 0 } else { rejects + 1 };
    }
    Ok(MaskPlan { n, seed: cfg.seed, spans: runs(&mask) })
}

/// `n x d` row-major table: `(p, 2i) = sin(p / 10000^(2i/d))`,
/// `(p, 2i+1) = cos(p / 10000^(2i/d))`.
pub fn sinusoidal_positions<T: Scalar>(n: usize, d: usize) -> Result<Vec<T>> {
    if !d.is_multiple_of(2) || d == 0 {
        return Err(Error::precondition(format!("position width must be even and positive, got {d}")));
    }
    if n == 0 {
        return Err(Error::precondition("need at least one position"));
    }
    let mut out = Vec::with_capacity(n * d);
    for p in 0..n {
        for i in 0..d / 2 {
            let angle = p as f64 / 10000f64.powf(2.0 * i as f64 / d as f64);
            out.push(T::of(angle.sin()));
            out.push(T::of(angle.cos()));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetNorm {
    /// `(x - mean) / sqrt(var + eps)` per patch, on pixels scaled to `[0, 1]`.
    PerPatch,
    /// Pixels scaled to `[0, 1]`.
    Raw,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PatchStats<T> {
    pub mean: T,
    pub var: T,
}

/// Pixel values scaled to `[0, 1]`.
pub fn patch_unit<T: Scalar>(patch: &Patch) -> Vec<T> {
    let scale = T::of(1.0 / 255.0);
    patch.pixels().iter().map(|&p| T::of(p as f64) * scale).collect()
}

pub fn normalize_targets<T: Scalar>(patch: &Patch, mode: TargetNorm, epsilon: T) -> (Vec<T>, PatchStats<T>) {
    let mut x = patch_unit::<T>(patch);
    match mode {
        TargetNorm::Raw => (x, PatchStats { mean: T::zero(), var: T::one() - epsilon }),
        TargetNorm::PerPatch => {
            let n = T::of_usize(PATCH_PIXELS);
            let mean = x.iter().copied().sum::<T>() / n;
            let var = x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let rstd = T::one() / (var + epsilon).sqrt();
            for v in &mut x {
                *v = (*v - mean) * rstd;
            }
            (x, PatchStats { mean, var })
        }
    }
}

/// Inverse of [`normalize_targets`], returning `[0, 1]`-scaled pixels.
pub fn denormalize<T: Scalar>(values: &[T], stats: PatchStats<T>, epsilon: T) -> Vec<T> {
    let std = (stats.var + epsilon).sqrt();
    values.iter().map(|&v| v * std + stats.mean).collect()
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use proptest::prelude::{prop_assert, prop_assert_eq, proptest};

    use super::*;

    #[test]
    fn paper_constants_plan() {
        let plan = sample_span_mask(20, &MaskConfig::default()).unwrap();
        assert!(plan.masked_count() >= 5);
        assert!(plan.spans().iter().all(|s| s.1 <= 6));
    }

    #[test]
    fn zero_ratio_is_empty() {
        let plan = sample_span_mask(10, &MaskConfig { ratio: 0.0, ..Default::default() }).unwrap();
        assert_eq!(plan.masked_count(), 0);
    }

    #[test]
    fn seeded_plans_repeat() {
        let cfg = MaskConfig { seed: 99, ..Default::default() };
        assert_eq!(sample_span_mask(300, &cfg).unwrap(), sample_span_mask(300, &cfg).unwrap());
        let other = MaskConfig { seed: 100, ..cfg };
        assert_ne!(sample_span_mask(300, &cfg).unwrap(), sample_span_mask(300, &other).unwrap());
    }

    #[test]
    fn preconditions() {
        assert!(sample_span_mask(0, &MaskConfig::default()).is_err());
        assert!(sample_span_mask(5, &MaskConfig { ratio: 1.5, ..Default::default() }).is_err());
        assert!(sample_span_mask(5, &MaskConfig { max_span: 0, ..Default::default() }).is_err());
    }

    #[test]
    fn full_ratio_masks_everything() {
        let plan = sample_span_mask(40, &MaskConfig { ratio: 1.0, ..Default::default() }).unwrap();
        assert_eq!(plan.masked_count(), 40);
    }

    #[test]
    fn json_shape() {
        let plan = MaskPlan::from_indices(10, 7, [1, 2, 3, 8]).unwrap();
        assert_eq!(plan.to_json(), r#"{"seed":7,"n":10,"spans":[[1,3],[8,1]]}"#);
        assert_eq!(MaskPlan::from_json(&plan.to_json()).unwrap(), plan);
        assert!(MaskPlan::from_indices(3, 0, [3]).is_err());
    }

    #[test]
    fn position_examples() {
        let pe = sinusoidal_positions::<f64>(4, 8).unwrap();
        assert_eq!(&pe[..8], &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert_relative_eq!(pe[8], 0.841_470_984_807_896_5, epsilon = 1e-15);
        assert!(pe.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(sinusoidal_positions::<f32>(3, 7).is_err());
        assert!(sinusoidal_positions::<f32>(0, 8).is_err());
    }

    #[test]
    fn position_rows_distinct() {
        let d = 32;
        let pe = sinusoidal_positions::<f64>(2000, d).unwrap();
        let mut rows: Vec<Vec<u64>> = pe.chunks(d).map(|r| r.iter().map(|v| v.to_bits()).collect()).collect();
        rows.sort();
        rows.dedup();
        assert_eq!(rows.len(), 2000);
    }

    #[test]
    fn target_normalisation() {
        let eps = TARGET_EPSILON;
        let (zeros, _) = normalize_targets::<f64>(&Patch::blank(), TargetNorm::PerPatch, eps);
        assert!(zeros.iter().all(|&v| v == 0.0));

        let mut p = Patch::blank();
        for (i, v) in p.0.iter_mut().enumerate() {
            *v = ((i * 37) % 256) as u8;
        }
        let (norm, stats) = normalize_targets::<f64>(&p, TargetNorm::PerPatch, eps);
        let mean = norm.iter().sum::<f64>() / 256.0;
        let var = norm.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 256.0;
        assert!(mean.abs() < 1e-12);
        assert_relative_eq!(var, 1.0, epsilon = 1e-4);
        let back = denormalize(&norm, stats, eps);
        for (b, &orig) in back.iter().zip(p.pixels()) {
            assert_relative_eq!(*b, orig as f64 / 255.0, epsilon = 1e-14);
        }

        let (raw, _) = normalize_targets::<f32>(&Patch::eos(), TargetNorm::Raw, 1e-6);
        assert!(raw.iter().all(|&v| v == 1.0));
    }

    proptest! {
        #[test]
        fn mask_bounds(n in 1usize..=528, seed in 0u64..1000) {
            let cfg = MaskConfig { seed, ..Default::default() };
            let plan = sample_span_mask(n, &cfg).unwrap();
            let target = n.div_ceil(4);
            prop_assert!(plan.masked_count() >= target);
            prop_assert!(plan.masked_count() < target + MAX_SPAN);
            prop_assert!(plan.spans().iter().all(|&(s, l)| (1..=MAX_SPAN).contains(&l) && s + l <= n));
            for w in plan.spans().windows(2) {
                prop_assert!(w[0].0 + w[0].1 < w[1].0);
            }
            prop_assert_eq!(plan.masked().len(), plan.masked_count());
        }
    }
}
