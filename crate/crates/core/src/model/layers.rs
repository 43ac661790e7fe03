//! Forward and backward passes of the building blocks. Activations are flat
//! `(tokens, features)` matrices; sequences are described by `(start, len)`
//! spans so batches need no padding.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::params::{ParamId, Params};
use super::scalar::{axpy, dot, Scalar};

pub type Span = (usize, usize);

const LN_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug)]
pub(crate) struct LinIds {
    pub w: ParamId,
    pub b: ParamId,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct LnIds {
    pub g: ParamId,
    pub b: ParamId,
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct AttnIds {
    pub q: LinIds,
    pub k: LinIds,
    pub v: LinIds,
    pub o: LinIds,
}

/// Source of dropout masks; inactive in evaluation mode.
pub struct Dropper {
    rng: Option<ChaCha8Rng>,
}

impl Dropper {
    pub fn eval() -> Self {
        Dropper { rng: None }
    }

    pub fn train(rng: ChaCha8Rng) -> Self {
        Dropper { rng: Some(rng) }
    }

    pub fn active(&self) -> bool {
        self.rng.is_some()
    }

    /// Inverted-dropout multiplier: 0 with probability `p`, else `1/(1-p)`.
    #[inline]
    fn draw<F: Scalar>(rng: &mut ChaCha8Rng, p: f64, keep: F) -> F {
        if rng.random::<f64>() < p {
            F::zero()
        } else {
            keep
        }
    }

    pub(crate) fn mask<F: Scalar>(&mut self, shape: (usize, usize), p: f64) -> Option<Array2<F>> {
        let rng = self.rng.as_mut().filter(|_| p > 0.0)?;
        let keep = F::of(1.0 / (1.0 - p));
        Some(Array2::from_shape_simple_fn(shape, || Self::draw(rng, p, keep)))
    }

    pub(crate) fn mask_vec<F: Scalar>(&mut self, n: usize, p: f64) -> Option<Vec<F>> {
        let rng = self.rng.as_mut().filter(|_| p > 0.0)?;
        let keep = F::of(1.0 / (1.0 - p));
        Some((0..n).map(|_| Self::draw(rng, p, keep)).collect())
    }
}

pub(crate) fn apply_mask<F: Scalar>(x: &mut Array2<F>, mask: &Option<Array2<F>>) {
    if let Some(m) = mask {
        *x *= m;
    }
}

pub(crate) fn linear_fwd<F: Scalar>(p: &Params<F>, l: LinIds, x: &Array2<F>) -> Array2<F> {
    let mut y = x.dot(p.get(l.w));
    y += &p.get(l.b).row(0);
    y
}

/// Accumulates weight and bias gradients and returns `dL/dx`.
pub(crate) fn linear_bwd<F: Scalar>(
    p: &Params<F>,
    g: &mut Params<F>,
    l: LinIds,
    x: &Array2<F>,
    dy: &Array2<F>,
) -> Array2<F> {
    general_mat_mul(F::one(), &x.t(), dy, F::one(), g.get_mut(l.w));
    let db = dy.sum_axis(Axis(0));
    let mut gb = g.get_mut(l.b).row_mut(0);
    gb += &db;
    dy.dot(&p.get(l.w).t())
}

pub(crate) struct LnCache<F> {
    xhat: Array2<F>,
    rstd: Vec<F>,
}

pub(crate) fn ln_fwd<F: Scalar>(p: &Params<F>, l: LnIds, x: &Array2<F>) -> (Array2<F>, LnCache<F>) {
    let d = x.ncols();
    let inv_d = F::of(1.0 / d as f64);
    let eps = F::of(LN_EPS);
    let mut xhat = x.clone();
    let mut rstd = Vec::with_capacity(x.nrows());
    for mut row in xhat.rows_mut() {
        let mean = row.sum() * inv_d;
        row -= mean;
        let var = row.iter().map(|&v| v * v).sum::<F>() * inv_d;
        let r = F::one() / (var + eps).sqrt();
        row *= r;
        rstd.push(r);
    }
    let mut y = &xhat * &p.get(l.g).row(0);
    y += &p.get(l.b).row(0);
    (y, LnCache { xhat, rstd })
}

pub(crate) fn ln_bwd<F: Scalar>(
    p: &Params<F>,
    g: &mut Params<F>,
    l: LnIds,
    c: &LnCache<F>,
    dy: &Array2<F>,
) -> Array2<F> {
    let dg = (dy * &c.xhat).sum_axis(Axis(0));
    let mut gg = g.get_mut(l.g).row_mut(0);
    gg += &dg;
    let db = dy.sum_axis(Axis(0));
    let mut gb = g.get_mut(l.b).row_mut(0);
    gb += &db;
    let mut dx = dy * &p.get(l.g).row(0);
    let inv_d = F::of(1.0 / dy.ncols() as f64);
    for ((mut row, xh), &r) in dx.rows_mut().into_iter().zip(c.xhat.rows()).zip(&c.rstd) {
        let m1 = row.sum() * inv_d;
        let m2 = row.iter().zip(xh.iter()).map(|(&a, &b)| a * b).sum::<F>() * inv_d;
        for (v, &h) in row.iter_mut().zip(xh.iter()) {
            *v = r * (*v - m1 - h * m2);
        }
    }
    dx
}

pub(crate) struct AttnCache<F> {
    q: Array2<F>,
    k: Array2<F>,
    v: Array2<F>,
    ctx: Array2<F>,
    probs: Vec<F>,
    drop: Option<Vec<F>>,
}

/// Multi-head scaled dot-product attention. Query span `i` attends to key
/// span `i`; with `causal` the two spans must coincide.
#[allow(clippy::too_many_arguments)]
pub(crate) fn attn_fwd<F: Scalar>(
    p: &Params<F>,
    ids: &AttnIds,
    heads: usize,
    xq: &Array2<F>,
    xkv: &Array2<F>,
    qspans: &[Span],
    kspans: &[Span],
    causal: bool,
    pdrop: f64,
    dropper: &mut Dropper,
) -> (Array2<F>, AttnCache<F>) {
    let q = linear_fwd(p, ids.q, xq);
    let k = linear_fwd(p, ids.k, xkv);
    let v = linear_fwd(p, ids.v, xkv);
    let d = q.ncols();
    let dh = d / heads;
    let scale = F::of(1.0 / (dh as f64).sqrt());
    let total: usize = qspans.iter().zip(kspans).map(|(a, b)| heads * a.1 * b.1).sum();
    let mut probs = vec![F::zero(); total];
    let drop = dropper.mask_vec::<F>(total, pdrop);
    let mut ctx = Array2::<F>::zeros((q.nrows(), d));
    {
        let (qs_, ks_, vs_) = (q.as_slice().unwrap(), k.as_slice().unwrap(), v.as_slice().unwrap());
        let cs = ctx.as_slice_mut().unwrap();
        let mut off = 0;
        for (&(qs, ql), &(ks, kl)) in qspans.iter().zip(kspans) {
            debug_assert!(!causal || ql == kl);
            for h in 0..heads {
                let ho = h * dh;
                for i in 0..ql {
                    let lim = if causal { i + 1 } else { kl };
                    let base = off + i * kl;
                    let row = &mut probs[base..base + lim];
                    let qi = &qs_[(qs + i) * d + ho..][..dh];
                    let mut mx = F::neg_infinity();
                    for (j, r) in row.iter_mut().enumerate() {
                        let s = dot(qi, &ks_[(ks + j) * d + ho..][..dh]) * scale;
                        *r = s;
                        mx = mx.max(s);
                    }
                    let mut sum = F::zero();
                    for r in row.iter_mut() {
                        *r = (*r - mx).exp();
                        sum += *r;
                    }
                    let inv = F::one() / sum;
                    let out = &mut cs[(qs + i) * d + ho..][..dh];
                    for (j, r) in row.iter_mut().enumerate() {
                        *r *= inv;
                        let w = match &drop {
                            Some(m) => *r * m[base + j],
                            None => *r,
                        };
                        axpy(out, w, &vs_[(ks + j) * d + ho..][..dh]);
                    }
                }
                off += ql * kl;
            }
        }
    }
    let y = linear_fwd(p, ids.o, &ctx);
    (
        y,
        AttnCache {
            q,
            k,
            v,
            ctx,
            probs,
            drop,
        },
    )
}

/// Returns `(dL/dxq, dL/dxkv)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn attn_bwd<F: Scalar>(
    p: &Params<F>,
    g: &mut Params<F>,
    ids: &AttnIds,
    heads: usize,
    c: &AttnCache<F>,
    xq: &Array2<F>,
    xkv: &Array2<F>,
    qspans: &[Span],
    kspans: &[Span],
    causal: bool,
    dy: &Array2<F>,
) -> (Array2<F>, Array2<F>) {
    let dctx = linear_bwd(p, g, ids.o, &c.ctx, dy);
    let d = c.q.ncols();
    let dh = d / heads;
    let scale = F::of(1.0 / (dh as f64).sqrt());
    let mut dq = Array2::<F>::zeros(c.q.raw_dim());
    let mut dk = Array2::<F>::zeros(c.k.raw_dim());
    let mut dv = Array2::<F>::zeros(c.v.raw_dim());
    {
        let (qs_, ks_, vs_) = (
            c.q.as_slice().unwrap(),
            c.k.as_slice().unwrap(),
            c.v.as_slice().unwrap(),
        );
        let dcs = dctx.as_slice().unwrap();
        let dqs = dq.as_slice_mut().unwrap();
        let dks = dk.as_slice_mut().unwrap();
        let dvs = dv.as_slice_mut().unwrap();
        let mut dp: Vec<F> = Vec::new();
        let mut off = 0;
        for (&(qs, ql), &(ks, kl)) in qspans.iter().zip(kspans) {
            for h in 0..heads {
                let ho = h * dh;
                for i in 0..ql {
                    let lim = if causal { i + 1 } else { kl };
                    let base = off + i * kl;
                    let prow = &c.probs[base..base + lim];
                    let dci = &dcs[(qs + i) * d + ho..][..dh];
                    dp.clear();
                    let mut s = F::zero();
                    for (j, &pj) in prow.iter().enumerate() {
                        let m = c.drop.as_ref().map_or(F::one(), |m| m[base + j]);
                        let vj = (ks + j) * d + ho;
                        let g_ = dot(dci, &vs_[vj..vj + dh]) * m;
                        axpy(&mut dvs[vj..vj + dh], pj * m, dci);
                        dp.push(g_);
                        s += pj * g_;
                    }
                    let qi = (qs + i) * d + ho;
                    for (j, &pj) in prow.iter().enumerate() {
                        let ds = pj * (dp[j] - s) * scale;
                        let kj = (ks + j) * d + ho;
                        axpy(&mut dqs[qi..qi + dh], ds, &ks_[kj..kj + dh]);
                        axpy(&mut dks[kj..kj + dh], ds, &qs_[qi..qi + dh]);
                    }
                }
                off += ql * kl;
            }
        }
    }
    let dxq = linear_bwd(p, g, ids.q, xq, &dq);
    let mut dxkv = linear_bwd(p, g, ids.k, xkv, &dk);
    dxkv += &linear_bwd(p, g, ids.v, xkv, &dv);
    (dxq, dxkv)
}

/// Sinusoidal position table, `(max_pos, dim)`.
pub(crate) fn sinusoid_table<F: Scalar>(max_pos: usize, dim: usize) -> Array2<F> {
    let mut t = Array2::zeros((max_pos, dim));
    for pos in 0..max_pos {
        for i in 0..dim / 2 {
            let freq = (10000f64).powf(-((2 * i) as f64) / dim as f64);
            let a = pos as f64 * freq;
            t[[pos, 2 * i]] = F::of(a.sin());
            t[[pos, 2 * i + 1]] = F::of(a.cos());
        }
    }
    t
}
