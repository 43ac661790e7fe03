//! Pre-norm transformer encoder-decoder with tied token embeddings.

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use super::batch::Batch;
use super::config::ModelConfig;
use super::layers::{
    apply_mask, attn_bwd, attn_fwd, linear_bwd, linear_fwd, ln_bwd, ln_fwd, sinusoid_table,
    AttnCache, AttnIds, Dropper, LinIds, LnCache, LnIds,
};
use super::params::{ParamId, Params};
use super::scalar::Scalar;
use crate::error::{Error, Result};
use crate::tokenize::{TokenId, NUM_SPECIALS};

const INIT_STREAM: u64 = 0x1a17;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Init {
    Embedding,
    Xavier,
    Zeros,
    Ones,
}

#[derive(Clone, Debug)]
pub(crate) struct EncLayerIds {
    ln1: LnIds,
    attn: AttnIds,
    ln2: LnIds,
    fc1: LinIds,
    fc2: LinIds,
}

#[derive(Clone, Debug)]
pub(crate) struct DecLayerIds {
    pub(crate) ln1: LnIds,
    pub(crate) self_attn: AttnIds,
    pub(crate) ln2: LnIds,
    pub(crate) cross: AttnIds,
    pub(crate) ln3: LnIds,
    pub(crate) fc1: LinIds,
    pub(crate) fc2: LinIds,
}

#[derive(Clone, Debug)]
pub(crate) struct ModelIds {
    pub(crate) tok: ParamId,
    pub(crate) lang: ParamId,
    enc: Vec<EncLayerIds>,
    pub(crate) enc_ln: LnIds,
    pub(crate) dec: Vec<DecLayerIds>,
    pub(crate) dec_ln: LnIds,
}

/// Parameter names, shapes and initialisers in registration order.
fn layout(cfg: &ModelConfig, vocab: usize) -> Vec<(String, (usize, usize), Init)> {
    let (d, f) = (cfg.dim, cfg.ffn_dim);
    let mut v = vec![
        ("tok_emb".to_string(), (vocab, d), Init::Embedding),
        ("lang_emb".to_string(), (2, d), Init::Embedding),
    ];
    let ln = |v: &mut Vec<_>, p: &str| {
        v.push((format!("{p}.g"), (1, d), Init::Ones));
        v.push((format!("{p}.b"), (1, d), Init::Zeros));
    };
    let lin = |v: &mut Vec<_>, p: &str, i: usize, o: usize| {
        v.push((format!("{p}.w"), (i, o), Init::Xavier));
        v.push((format!("{p}.b"), (1, o), Init::Zeros));
    };
    let attn = |v: &mut Vec<_>, p: &str| {
        for m in ["q", "k", "v", "o"] {
            lin(v, &format!("{p}.{m}"), d, d);
        }
    };
    for l in 0..cfg.layers {
        let p = format!("enc.{l}");
        ln(&mut v, &format!("{p}.ln1"));
        attn(&mut v, &format!("{p}.attn"));
        ln(&mut v, &format!("{p}.ln2"));
        lin(&mut v, &format!("{p}.fc1"), d, f);
        lin(&mut v, &format!("{p}.fc2"), f, d);
    }
    ln(&mut v, "enc.ln");
    for l in 0..cfg.layers {
        let p = format!("dec.{l}");
        ln(&mut v, &format!("{p}.ln1"));
        attn(&mut v, &format!("{p}.self"));
        ln(&mut v, &format!("{p}.ln2"));
        attn(&mut v, &format!("{p}.cross"));
        ln(&mut v, &format!("{p}.ln3"));
        lin(&mut v, &format!("{p}.fc1"), d, f);
        lin(&mut v, &format!("{p}.fc2"), f, d);
    }
    ln(&mut v, "dec.ln");
    v
}

fn resolve<F: Scalar>(p: &Params<F>, cfg: &ModelConfig) -> ModelIds {
    let id = |n: String| p.id(&n).unwrap_or_else(|| panic!("missing parameter {n}"));
    let ln = |n: &str| LnIds {
        g: id(format!("{n}.g")),
        b: id(format!("{n}.b")),
    };
    let lin = |n: &str| LinIds {
        w: id(format!("{n}.w")),
        b: id(format!("{n}.b")),
    };
    let attn = |n: &str| AttnIds {
        q: lin(&format!("{n}.q")),
        k: lin(&format!("{n}.k")),
        v: lin(&format!("{n}.v")),
        o: lin(&format!("{n}.o")),
    };
    ModelIds {
        tok: id("tok_emb".into()),
        lang: id("lang_emb".into()),
        enc: (0..cfg.layers)
            .map(|l| EncLayerIds {
                ln1: ln(&format!("enc.{l}.ln1")),
                attn: attn(&format!("enc.{l}.attn")),
                ln2: ln(&format!("enc.{l}.ln2")),
                fc1: lin(&format!("enc.{l}.fc1")),
                fc2: lin(&format!("enc.{l}.fc2")),
            })
            .collect(),
        enc_ln: ln("enc.ln"),
        dec: (0..cfg.layers)
            .map(|l| DecLayerIds {
                ln1: ln(&format!("dec.{l}.ln1")),
                self_attn: attn(&format!("dec.{l}.self")),
                ln2: ln(&format!("dec.{l}.ln2")),
                cross: attn(&format!("dec.{l}.cross")),
                ln3: ln(&format!("dec.{l}.ln3")),
                fc1: lin(&format!("dec.{l}.fc1")),
                fc2: lin(&format!("dec.{l}.fc2")),
            })
            .collect(),
        dec_ln: ln("dec.ln"),
    }
}

/// Loss summary of one batch. `loss` is the label-smoothed objective, `nll`
/// the unsmoothed token-mean negative log-likelihood; both are weighted means.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossStats {
    pub loss: f64,
    pub nll: f64,
    /// Sum of token weights.
    pub weight: f64,
    pub tokens: usize,
}

impl LossStats {
    /// Weighted combination of per-batch statistics.
    pub fn merge(self, o: LossStats) -> LossStats {
        let w = self.weight + o.weight;
        if w == 0.0 {
            return self;
        }
        LossStats {
            loss: (self.loss * self.weight + o.loss * o.weight) / w,
            nll: (self.nll * self.weight + o.nll * o.weight) / w,
            weight: w,
            tokens: self.tokens + o.tokens,
        }
    }

    pub fn perplexity(&self) -> f64 {
        self.nll.exp()
    }
}

#[derive(Clone, Debug)]
pub struct EditorModel<F: Scalar> {
    pub config: ModelConfig,
    pub vocab_size: usize,
    params: Params<F>,
    pub(crate) ids: ModelIds,
    pub(crate) pe: Array2<F>,
}

struct EncCache<F> {
    ln1: LnCache<F>,
    h1: Array2<F>,
    attn: AttnCache<F>,
    m_a: Option<Array2<F>>,
    ln2: LnCache<F>,
    h2: Array2<F>,
    ffn: FfnCache<F>,
}

struct DecCache<F> {
    ln1: LnCache<F>,
    h1: Array2<F>,
    self_attn: AttnCache<F>,
    m_a: Option<Array2<F>>,
    ln2: LnCache<F>,
    h2: Array2<F>,
    cross: AttnCache<F>,
    m_c: Option<Array2<F>>,
    ln3: LnCache<F>,
    h3: Array2<F>,
    ffn: FfnCache<F>,
}

struct FfnCache<F> {
    f1: Array2<F>,
    r: Array2<F>,
    m_r: Option<Array2<F>>,
    m_o: Option<Array2<F>>,
}

struct Forward<F> {
    enc_mask: Option<Array2<F>>,
    enc: Vec<EncCache<F>>,
    enc_ln: LnCache<F>,
    enc_out: Array2<F>,
    dec_mask: Option<Array2<F>>,
    dec: Vec<DecCache<F>>,
    dec_ln: LnCache<F>,
    dec_h: Array2<F>,
}

impl<F: Scalar> EditorModel<F> {
    /// Fresh model initialised from `config.seed`.
    pub fn new(config: ModelConfig, vocab_size: usize) -> Result<Self> {
        config.validate()?;
        if vocab_size <= NUM_SPECIALS {
            return Err(Error::InvalidArgument(format!("vocabulary of {vocab_size} is too small")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ INIT_STREAM);
        let d = config.dim as f64;
        let emb = Normal::new(0.0, 0.5 / d.sqrt()).expect("valid std");
        let mut params = Params::new();
        for (name, (r, c), init) in layout(&config, vocab_size) {
            let t = match init {
                Init::Zeros => Array2::zeros((r, c)),
                Init::Ones => Array2::ones((r, c)),
                Init::Embedding => {
                    Array2::from_shape_simple_fn((r, c), || F::of(emb.sample(&mut rng)))
                }
                Init::Xavier => {
                    let a = (6.0 / (r + c) as f64).sqrt();
                    let u = Uniform::new_inclusive(-a, a).expect("valid range");
                    Array2::from_shape_simple_fn((r, c), || F::of(u.sample(&mut rng)))
                }
            };
            params.add(name, t);
        }
        Ok(Self::assemble(config, vocab_size, params))
    }

    fn assemble(config: ModelConfig, vocab_size: usize, params: Params<F>) -> Self {
        let ids = resolve(&params, &config);
        let pe = sinusoid_table(config.max_len + 1, config.dim);
        EditorModel {
            config,
            vocab_size,
            params,
            ids,
            pe,
        }
    }

    /// Rebuilds a model from named tensors, checking them against the layout
    /// implied by the config.
    pub fn from_params(config: ModelConfig, vocab_size: usize, params: Params<F>) -> Result<Self> {
        config.validate()?;
        let expected = layout(&config, vocab_size);
        if expected.len() != params.len() {
            return Err(Error::ManifestMismatch(format!(
                "expected {} tensors, found {}",
                expected.len(),
                params.len()
            )));
        }
        for ((name, shape, _), (pname, t)) in expected.iter().zip(params.iter()) {
            if name != pname || *shape != t.dim() {
                return Err(Error::ManifestMismatch(format!(
                    "expected {name} {shape:?}, found {pname} {:?}",
                    t.dim()
                )));
            }
        }
        Ok(Self::assemble(config, vocab_size, params))
    }

    /// Names and shapes of all parameters for the given architecture.
    pub fn param_layout(config: &ModelConfig, vocab_size: usize) -> Vec<(String, (usize, usize))> {
        layout(config, vocab_size)
            .into_iter()
            .map(|(n, s, _)| (n, s))
            .collect()
    }

    pub fn params(&self) -> &Params<F> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Params<F> {
        &mut self.params
    }

    pub fn cast<G: Scalar>(&self) -> EditorModel<G> {
        EditorModel::assemble(self.config.clone(), self.vocab_size, self.params.cast())
    }

    pub(crate) fn emb_scale(&self) -> F {
        F::of((self.config.dim as f64).sqrt())
    }

    /// Scaled token embedding plus sinusoidal position, and optionally the
    /// language embedding.
    pub(crate) fn embed(&self, ids: &[TokenId], pos: &[usize], lang: Option<&[usize]>) -> Array2<F> {
        let d = self.config.dim;
        let e = self.params.get(self.ids.tok);
        let le = self.params.get(self.ids.lang);
        let s = self.emb_scale();
        let mut x = Array2::zeros((ids.len(), d));
        for (t, mut row) in x.rows_mut().into_iter().enumerate() {
            row.assign(&e.row(ids[t] as usize));
            row *= s;
            row += &self.pe.row(pos[t]);
            if let Some(l) = lang {
                row += &le.row(l[t]);
            }
        }
        x
    }

    fn ffn_fwd(&self, fc1: LinIds, fc2: LinIds, h: &Array2<F>, dr: &mut Dropper) -> (Array2<F>, FfnCache<F>) {
        let p = &self.params;
        let f1 = linear_fwd(p, fc1, h);
        let mut r = f1.mapv(|v| v.max(F::zero()));
        let m_r = dr.mask(r.dim(), self.config.relu_dropout);
        apply_mask(&mut r, &m_r);
        let mut o = linear_fwd(p, fc2, &r);
        let m_o = dr.mask(o.dim(), self.config.dropout);
        apply_mask(&mut o, &m_o);
        (o, FfnCache { f1, r, m_r, m_o })
    }

    fn ffn_bwd(
        &self,
        g: &mut Params<F>,
        fc1: LinIds,
        fc2: LinIds,
        h: &Array2<F>,
        c: &FfnCache<F>,
        dy: &Array2<F>,
    ) -> Array2<F> {
        let p = &self.params;
        let mut dout = dy.clone();
        apply_mask(&mut dout, &c.m_o);
        let mut dr = linear_bwd(p, g, fc2, &c.r, &dout);
        apply_mask(&mut dr, &c.m_r);
        dr.zip_mut_with(&c.f1, |d, &f| {
            if f <= F::zero() {
                *d = F::zero()
            }
        });
        linear_bwd(p, g, fc1, h, &dr)
    }

    fn forward(&self, b: &Batch, dr: &mut Dropper) -> Forward<F> {
        let cfg = &self.config;
        let p = &self.params;
        let h = cfg.heads;
        let mut x = self.embed(&b.enc_ids, &b.enc_pos, Some(&b.enc_lang));
        let enc_mask = dr.mask(x.dim(), cfg.dropout);
        apply_mask(&mut x, &enc_mask);
        let mut enc = Vec::with_capacity(cfg.layers);
        for l in &self.ids.enc {
            let (h1, ln1) = ln_fwd(p, l.ln1, &x);
            let (mut a, attn) = attn_fwd(
                p, &l.attn, h, &h1, &h1, &b.enc_spans, &b.enc_spans, false, cfg.attn_dropout, dr,
            );
            let m_a = dr.mask(a.dim(), cfg.dropout);
            apply_mask(&mut a, &m_a);
            x += &a;
            let (h2, ln2) = ln_fwd(p, l.ln2, &x);
            let (o, ffn) = self.ffn_fwd(l.fc1, l.fc2, &h2, dr);
            x += &o;
            enc.push(EncCache {
                ln1,
                h1,
                attn,
                m_a,
                ln2,
                h2,
                ffn,
            });
        }
        let (enc_out, enc_ln) = ln_fwd(p, self.ids.enc_ln, &x);

        let mut y = self.embed(&b.dec_ids, &b.dec_pos, None);
        let dec_mask = dr.mask(y.dim(), cfg.dropout);
        apply_mask(&mut y, &dec_mask);
        let mut dec = Vec::with_capacity(cfg.layers);
        for l in &self.ids.dec {
            let (h1, ln1) = ln_fwd(p, l.ln1, &y);
            let (mut a, self_attn) = attn_fwd(
                p, &l.self_attn, h, &h1, &h1, &b.dec_spans, &b.dec_spans, true, cfg.attn_dropout, dr,
            );
            let m_a = dr.mask(a.dim(), cfg.dropout);
            apply_mask(&mut a, &m_a);
            y += &a;
            let (h2, ln2) = ln_fwd(p, l.ln2, &y);
            let (mut c, cross) = attn_fwd(
                p, &l.cross, h, &h2, &enc_out, &b.dec_spans, &b.enc_spans, false, cfg.attn_dropout, dr,
            );
            let m_c = dr.mask(c.dim(), cfg.dropout);
            apply_mask(&mut c, &m_c);
            y += &c;
            let (h3, ln3) = ln_fwd(p, l.ln3, &y);
            let (o, ffn) = self.ffn_fwd(l.fc1, l.fc2, &h3, dr);
            y += &o;
            dec.push(DecCache {
                ln1,
                h1,
                self_attn,
                m_a,
                ln2,
                h2,
                cross,
                m_c,
                ln3,
                h3,
                ffn,
            });
        }
        let (dec_h, dec_ln) = ln_fwd(p, self.ids.dec_ln, &y);
        Forward {
            enc_mask,
            enc,
            enc_ln,
            enc_out,
            dec_mask,
            dec,
            dec_ln,
            dec_h,
        }
    }

    pub(crate) fn logits(&self, h: &Array2<F>) -> Array2<F> {
        h.dot(&self.params.get(self.ids.tok).t())
    }

    /// Weighted label-smoothed loss over the rows of `logits`, which are used
    /// as scratch. When `grad` is set they end up holding `dL/dlogits`.
    fn loss_rows(
        &self,
        logits: &mut Array2<F>,
        targets: &[TokenId],
        tok_w: &[f64],
        eps: f64,
        grad: bool,
    ) -> Result<LossStats> {
        let v = logits.ncols();
        let eps_i = eps / (v as f64 - 1.0);
        let total_w: f64 = tok_w.iter().sum();
        let (mut loss, mut nll) = (0.0f64, 0.0f64);
        for ((mut row, &y), &w) in logits.rows_mut().into_iter().zip(targets).zip(tok_w) {
            let row = row.as_slice_mut().expect("logits are row-major");
            let y = y as usize;
            let mx = row.iter().fold(F::neg_infinity(), |m, &z| m.max(z));
            let (zy, mut sum_z, mut sum_exp) = (row[y].as_f64(), 0.0f64, 0.0f64);
            // one exp per logit, kept in the row for the gradient
            for z in row.iter_mut() {
                sum_z += z.as_f64();
                *z = (*z - mx).exp();
                sum_exp += z.as_f64();
            }
            let lse = mx.as_f64() + sum_exp.ln();
            let tok_nll = lse - zy;
            let smooth = v as f64 * lse - sum_z;
            loss += w * ((1.0 - eps - eps_i) * tok_nll + eps_i * smooth);
            nll += w * tok_nll;
            if grad {
                let s = w / total_w;
                let inv = 1.0 / sum_exp;
                for z in row.iter_mut() {
                    *z = F::of(s * (z.as_f64() * inv - eps_i));
                }
                row[y] -= F::of(s * (1.0 - eps - eps_i));
            }
        }
        let stats = LossStats {
            loss: loss / total_w,
            nll: nll / total_w,
            weight: total_w,
            tokens: targets.len(),
        };
        if !stats.loss.is_finite() || !stats.nll.is_finite() {
            return Err(Error::NonFiniteLoss {
                update: 0,
                detail: format!("loss {} nll {}", stats.loss, stats.nll),
            });
        }
        Ok(stats)
    }

    /// Evaluation-mode loss plus the sign pattern of every ReLU input, which
    /// tells finite-difference checks whether a perturbation crossed a kink.
    pub(crate) fn loss_with_relu_signs(&self, b: &Batch, eps: f64) -> Result<(LossStats, Vec<bool>)> {
        let fw = self.forward(b, &mut Dropper::eval());
        let mut logits = self.logits(&fw.dec_h);
        let stats = self.loss_rows(&mut logits, &b.targets, &b.token_weights(), eps, false)?;
        let ffns = fw.enc.iter().map(|c| &c.ffn).chain(fw.dec.iter().map(|c| &c.ffn));
        let signs = ffns.flat_map(|c| c.f1.iter().map(|&v| v > F::zero())).collect();
        Ok((stats, signs))
    }

    /// Evaluation-mode loss with the given smoothing; no gradients.
    pub fn loss(&self, b: &Batch, label_smoothing: f64) -> Result<LossStats> {
        if b.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let fw = self.forward(b, &mut Dropper::eval());
        let mut logits = self.logits(&fw.dec_h);
        self.loss_rows(&mut logits, &b.targets, &b.token_weights(), label_smoothing, false)
    }

    /// Label-smoothed teacher-forced loss of the batch and its exact gradient.
    pub fn loss_and_grads(&self, b: &Batch, dr: &mut Dropper) -> Result<(LossStats, Params<F>)> {
        if b.is_empty() {
            return Err(Error::InvalidArgument("empty batch".into()));
        }
        let cfg = &self.config;
        let p = &self.params;
        let h = cfg.heads;
        let fw = self.forward(b, dr);
        let mut dlogits = self.logits(&fw.dec_h);
        let stats = self.loss_rows(
            &mut dlogits,
            &b.targets,
            &b.token_weights(),
            cfg.label_smoothing,
            true,
        )?;
        let mut g = p.zeros_like();
        let e = p.get(self.ids.tok);
        // logits = dec_h E^T
        ndarray::linalg::general_mat_mul(
            F::one(),
            &dlogits.t(),
            &fw.dec_h,
            F::one(),
            g.get_mut(self.ids.tok),
        );
        let d_dec_h = dlogits.dot(e);
        drop(dlogits);
        let mut dy = ln_bwd(p, &mut g, self.ids.dec_ln, &fw.dec_ln, &d_dec_h);
        let mut d_enc = Array2::<F>::zeros(fw.enc_out.raw_dim());
        for (l, c) in self.ids.dec.iter().zip(&fw.dec).rev() {
            let dh3 = self.ffn_bwd(&mut g, l.fc1, l.fc2, &c.h3, &c.ffn, &dy);
            dy += &ln_bwd(p, &mut g, l.ln3, &c.ln3, &dh3);
            let mut dc = dy.clone();
            apply_mask(&mut dc, &c.m_c);
            let (dh2, dkv) = attn_bwd(
                p, &mut g, &l.cross, h, &c.cross, &c.h2, &fw.enc_out, &b.dec_spans, &b.enc_spans,
                false, &dc,
            );
            d_enc += &dkv;
            dy += &ln_bwd(p, &mut g, l.ln2, &c.ln2, &dh2);
            let mut da = dy.clone();
            apply_mask(&mut da, &c.m_a);
            let (mut dq, dkv) = attn_bwd(
                p, &mut g, &l.self_attn, h, &c.self_attn, &c.h1, &c.h1, &b.dec_spans, &b.dec_spans,
                true, &da,
            );
            dq += &dkv;
            dy += &ln_bwd(p, &mut g, l.ln1, &c.ln1, &dq);
        }
        apply_mask(&mut dy, &fw.dec_mask);
        self.embed_bwd(&mut g, &b.dec_ids, None, &dy);

        let mut dx = ln_bwd(p, &mut g, self.ids.enc_ln, &fw.enc_ln, &d_enc);
        for (l, c) in self.ids.enc.iter().zip(&fw.enc).rev() {
            let dh2 = self.ffn_bwd(&mut g, l.fc1, l.fc2, &c.h2, &c.ffn, &dx);
            dx += &ln_bwd(p, &mut g, l.ln2, &c.ln2, &dh2);
            let mut da = dx.clone();
            apply_mask(&mut da, &c.m_a);
            let (mut dq, dkv) = attn_bwd(
                p, &mut g, &l.attn, h, &c.attn, &c.h1, &c.h1, &b.enc_spans, &b.enc_spans, false, &da,
            );
            dq += &dkv;
            dx += &ln_bwd(p, &mut g, l.ln1, &c.ln1, &dq);
        }
        apply_mask(&mut dx, &fw.enc_mask);
        self.embed_bwd(&mut g, &b.enc_ids, Some(&b.enc_lang), &dx);
        Ok((stats, g))
    }

    fn embed_bwd(&self, g: &mut Params<F>, ids: &[TokenId], lang: Option<&[usize]>, dx: &Array2<F>) {
        let s = self.emb_scale();
        {
            let ge = g.get_mut(self.ids.tok);
            for (t, row) in dx.axis_iter(Axis(0)).enumerate() {
                let mut dst = ge.row_mut(ids[t] as usize);
                dst.scaled_add(s, &row);
            }
        }
        if let Some(l) = lang {
            let gl = g.get_mut(self.ids.lang);
            for (t, row) in dx.axis_iter(Axis(0)).enumerate() {
                let mut dst = gl.row_mut(l[t]);
                dst += &row;
            }
        }
    }

    /// Encoder states for a batch in evaluation mode, with their spans.
    pub(crate) fn encode_eval(&self, b: &Batch) -> Array2<F> {
        let cfg = &self.config;
        let p = &self.params;
        let mut dr = Dropper::eval();
        let mut x = self.embed(&b.enc_ids, &b.enc_pos, Some(&b.enc_lang));
        for l in &self.ids.enc {
            let (h1, _) = ln_fwd(p, l.ln1, &x);
            let (a, _) = attn_fwd(
                p, &l.attn, cfg.heads, &h1, &h1, &b.enc_spans, &b.enc_spans, false, 0.0, &mut dr,
            );
            x += &a;
            let (h2, _) = ln_fwd(p, l.ln2, &x);
            let (o, _) = self.ffn_fwd(l.fc1, l.fc2, &h2, &mut dr);
            x += &o;
        }
        ln_fwd(p, self.ids.enc_ln, &x).0
    }

    pub(crate) fn ffn_eval(&self, fc1: LinIds, fc2: LinIds, h: &Array2<F>) -> Array2<F> {
        self.ffn_fwd(fc1, fc2, h, &mut Dropper::eval()).0
    }
}
