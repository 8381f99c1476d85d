//! Row-major dense kernels with hand-written backward passes. Activations
//! are `rows x dim` slices.

use super::params::{LayerNorm, Linear};
use crate::scalar::Scalar;

pub const LN_EPSILON: f64 = 1e-6;

/// `y = x W^T + b`.
pub fn linear<T: Scalar>(x: &[T], rows: usize, l: &Linear<T>) -> Vec<T> {
    let (inp, out) = (l.in_dim(), l.out_dim());
    debug_assert_eq!(x.len(), rows * inp);
    let w = &l.weight.data;
    let mut y = Vec::with_capacity(rows * out);
    for r in 0..rows {
        let xr = &x[r * inp..(r + 1) * inp];
        for o in 0..out {
            let wo = &w[o * inp..(o + 1) * inp];
            let mut acc = l.bias.data[o];
            for (a, b) in xr.iter().zip(wo) {
                acc += *a * *b;
            }
            y.push(acc);
        }
    }
    y
}

/// Accumulates weight and bias gradients into `g` and returns `dx`.
pub fn linear_backward<T: Scalar>(x: &[T], rows: usize, l: &Linear<T>, dy: &[T], g: &mut Linear<T>) -> Vec<T> {
    let (inp, out) = (l.in_dim(), l.out_dim());
    let w = &l.weight.data;
    let mut dx = vec![T::zero(); rows * inp];
    for r in 0..rows {
        let xr = &x[r * inp..(r + 1) * inp];
        let dxr = &mut dx[r * inp..(r + 1) * inp];
        for o in 0..out {
            let d = dy[r * out + o];
            if d == T::zero() {
                continue;
            }
            g.bias.data[o] += d;
            let gw = &mut g.weight.data[o * inp..(o + 1) * inp];
            for (gv, xv) in gw.iter_mut().zip(xr) {
                *gv += d * *xv;
            }
            for (dv, wv) in dxr.iter_mut().zip(&w[o * inp..(o + 1) * inp]) {
                *dv += d * *wv;
            }
        }
    }
    dx
}

/// Normalised activations and reciprocal standard deviations per row.
pub struct NormCache<T> {
    xhat: Vec<T>,
    rstd: Vec<T>,
}

pub fn layer_norm<T: Scalar>(x: &[T], rows: usize, ln: &LayerNorm<T>) -> (Vec<T>, NormCache<T>) {
    let dim = ln.gamma.len();
    let eps = T::of(LN_EPSILON);
    let nd = T::of_usize(dim);
    let mut xhat = Vec::with_capacity(rows * dim);
    let mut rstd = Vec::with_capacity(rows);
    let mut y = Vec::with_capacity(rows * dim);
    for r in 0..rows {
        let xr = &x[r * dim..(r + 1) * dim];
        let mean = xr.iter().copied().sum::<T>() / nd;
        let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / nd;
        let rs = T::one() / (var + eps).sqrt();
        rstd.push(rs);
        for (i, &v) in xr.iter().enumerate() {
            let h = (v - mean) * rs;
            xhat.push(h);
            y.push(h * ln.gamma.data[i] + ln.beta.data[i]);
        }
    }
    (y, NormCache { xhat, rstd })
}

pub fn layer_norm_backward<T: Scalar>(
    cache: &NormCache<T>,
    rows: usize,
    ln: &LayerNorm<T>,
    dy: &[T],
    g: &mut LayerNorm<T>,
) -> Vec<T> {
    let dim = ln.gamma.len();
    let nd = T::of_usize(dim);
    let mut dx = vec![T::zero(); rows * dim];
    let mut dxhat = vec![T::zero(); dim];
    for r in 0..rows {
        let xh = &cache.xhat[r * dim..(r + 1) * dim];
        let dyr = &dy[r * dim..(r + 1) * dim];
        let mut sum = T::zero();
        let mut sum_xh = T::zero();
        for i in 0..dim {
            g.gamma.data[i] += dyr[i] * xh[i];
            g.beta.data[i] += dyr[i];
            dxhat[i] = dyr[i] * ln.gamma.data[i];
            sum += dxhat[i];
            sum_xh += dxhat[i] * xh[i];
        }
        let (mean, mean_xh) = (sum / nd, sum_xh / nd);
        for i in 0..dim {
            dx[r * dim + i] = cache.rstd[r] * (dxhat[i] - mean - xh[i] * mean_xh);
        }
    }
    dx
}

const GELU_CUBIC: f64 = 0.044715;

fn gelu_coeff<T: Scalar>() -> T {
    T::of((2.0 / std::f64::consts::PI).sqrt())
}

/// Tanh approximation of GELU.
pub fn gelu<T: Scalar>(x: &[T]) -> Vec<T> {
    let (c, k, half) = (gelu_coeff::<T>(), T::of(GELU_CUBIC), T::of(0.5));
    x.iter().map(|&v| half * v * (T::one() + (c * (v + k * v * v * v)).tanh())).collect()
}

pub fn gelu_backward<T: Scalar>(x: &[T], dy: &[T]) -> Vec<T> {
    let (c, k, half, three) = (gelu_coeff::<T>(), T::of(GELU_CUBIC), T::of(0.5), T::of(3.0));
    x.iter()
        .zip(dy)
        .map(|(&v, &d)| {
            let t = (c * (v + k * v * v * v)).tanh();
            let dt = (T::one() - t * t) * c * (T::one() + three * k * v * v);
            d * (half * (T::one() + t) + half * v * dt)
        })
        .collect()
}

/// Softmax probabilities per head, `heads x rows x rows`.
pub struct AttnCache<T> {
    probs: Vec<T>,
}

/// Multi-head scaled dot-product attention over all rows, no masking.
pub fn attention<T: Scalar>(q: &[T], k: &[T], v: &[T], rows: usize, dim: usize, heads: usize) -> (Vec<T>, AttnCache<T>) {
    let hd = dim / heads;
    let scale = T::one() / T::of_usize(hd).sqrt();
    let mut probs = vec![T::zero(); heads * rows * rows];
    let mut out = vec![T::zero(); rows * dim];
    for h in 0..heads {
        let off = h * hd;
        for i in 0..rows {
            let p = &mut probs[(h * rows + i) * rows..(h * rows + i + 1) * rows];
            let qi = &q[i * dim + off..i * dim + off + hd];
            let mut max = T::neg_infinity();
            for (j, pj) in p.iter_mut().enumerate() {
                let kj = &k[j * dim + off..j * dim + off + hd];
                let s = qi.iter().zip(kj).map(|(a, b)| *a * *b).sum::<T>() * scale;
                *pj = s;
                max = max.max(s);
            }
            let mut z = T::zero();
            for pj in p.iter_mut() {
                *pj = (*pj - max).exp();
                z += *pj;
            }
            let oi = &mut out[i * dim + off..i * dim + off + hd];
            for (j, pj) in p.iter_mut().enumerate() {
                *pj /= z;
                let vj = &v[j * dim + off..j * dim + off + hd];
                for (o, vv) in oi.iter_mut().zip(vj) {
                    *o += *pj * *vv;
                }
            }
        }
    }
    (out, AttnCache { probs })
}

/// Returns `(dq, dk, dv)`.
#[allow(clippy::too_many_arguments)]
pub fn attention_backward<T: Scalar>(
    q: &[T],
    k: &[T],
    v: &[T],
    cache: &AttnCache<T>,
    rows: usize,
    dim: usize,
    heads: usize,
    dout: &[T],
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let hd = dim / heads;
    let scale = T::one() / T::of_usize(hd).sqrt();
    let mut dq = vec![T::zero(); rows * dim];
    let mut dk = vec![T::zero(); rows * dim];
    let mut dv = vec![T::zero(); rows * dim];
    let mut dp = vec![T::zero(); rows];
    for h in 0..heads {
        let off = h * hd;
        for i in 0..rows {
            let p = &cache.probs[(h * rows + i) * rows..(h * rows + i + 1) * rows];
            let doi = &dout[i * dim + off..i * dim + off + hd];
            let mut dot = T::zero();
            for j in 0..rows {
                let vj = &v[j * dim + off..j * dim + off + hd];
                dp[j] = doi.iter().zip(vj).map(|(a, b)| *a * *b).sum();
                dot += dp[j] * p[j];
                let dvj = &mut dv[j * dim + off..j * dim + off + hd];
                for (d, o) in dvj.iter_mut().zip(doi) {
                    *d += p[j] * *o;
                }
            }
            for j in 0..rows {
                let ds = p[j] * (dp[j] - dot) * scale;
                if ds == T::zero() {
                    continue;
                }
                for t in 0..hd {
                    dq[i * dim + off + t] += ds * k[j * dim + off + t];
                    dk[j * dim + off + t] += ds * q[i * dim + off + t];
                }
            }
        }
    }
    (dq, dk, dv)
}

pub fn add_assign<T: Scalar>(a: &mut [T], b: &[T]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += *y;
    }
}
