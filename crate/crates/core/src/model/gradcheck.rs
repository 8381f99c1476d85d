//! Central finite-difference check of the analytic gradients.

use rand::Rng;

use super::mae::Model;
use crate::error::{Error, Result};
use crate::masking::{rng_stream, MaskPlan};
use crate::render::PatchSequence;

/// Denominator floor for the relative error, so that parameters with
/// vanishing gradients are judged by absolute error.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Name and element index of the worst parameter.
    pub worst: (String, usize),
}

/// Compares analytic gradients with `(L(p + h) - L(p - h)) / 2h` on
/// `samples` uniformly drawn parameters plus one element of every tensor.
pub fn grad_check(
    model: &Model<f64>,
    seq: &PatchSequence,
    plan: &MaskPlan,
    step: f64,
    samples: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    if step <= 0.0 {
        return Err(Error::precondition("finite-difference step must be positive"));
    }
    let (_, grads) = model.loss_and_grad(seq, plan)?;
    let names: Vec<(String, usize)> = model.params.tensors().iter().map(|(n, t)| (n.clone(), t.len())).collect();
    let total: usize = names.iter().map(|n| n.1).sum();
    let mut rng = rng_stream(seed, 0);
    let mut picks: Vec<(usize, usize)> = Vec::new();
    for (ti, (_, len)) in names.iter().enumerate() {
        picks.push((ti, rng.random_range(0..*len)));
    }
    for _ in 0..samples {
        let mut flat = rng.random_range(0..total);
        let mut ti = 0;
        while flat >= names[ti].1 {
            flat -= names[ti].1;
            ti += 1;
        }
        picks.push((ti, flat));
    }
    let grad_tensors = grads.tensors();
    let mut probe = model.params.clone();
    let mut report = GradCheckReport { max_relative_error: 0.0, checked: picks.len(), worst: (String::new(), 0) };
    for (ti, ei) in picks {
        let original = model.params.tensors()[ti].1.data[ei];
        probe.tensors_mut()[ti].data[ei] = original + step;
        let plus = model.loss_with(&probe, seq, plan)?;
        probe.tensors_mut()[ti].data[ei] = original - step;
        let minus = model.loss_with(&probe, seq, plan)?;
        probe.tensors_mut()[ti].data[ei] = original;
        let numeric = (plus - minus) / (2.0 * step);
        let analytic = grad_tensors[ti].1.data[ei];
        let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(GRAD_CHECK_FLOOR);
        if rel > report.max_relative_error {
            report.max_relative_error = rel;
            report.worst = (names[ti].0.clone(), ei);
        }
    }
    Ok(report)
}
