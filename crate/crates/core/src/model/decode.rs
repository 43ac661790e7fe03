//! Autoregressive decoding with cached keys and values, the constrained
//! language-id first step, and the corpus-level operators built on it.

use ndarray::Array2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::batch::{encode_input, Batch};
use super::layers::{linear_fwd, ln_fwd, AttnIds};
use super::net::EditorModel;
use super::scalar::{axpy, dot, Scalar};
use crate::corpus::{Corpus, Side};
use crate::error::{Error, Result};
use crate::tokenize::{is_lang_id, TokenId, Tokenizer, BOS, EOS, LANG_E, LANG_F, MASK, PAD, SEP};

const CHUNK: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecodeOptions {
    pub beam: usize,
    /// Forces the first token instead of letting the model choose.
    pub forced_lang: Option<TokenId>,
    /// Cap on generated tokens (language id, body and EOS). Defaults to
    /// `min(max_len, 2 * longest input + 10)`.
    pub max_len: Option<usize>,
}

impl Default for DecodeOptions {
    fn default() -> Self {
        DecodeOptions {
            beam: 1,
            forced_lang: None,
            max_len: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Decoded {
    pub lang: TokenId,
    /// Body without the language id and EOS.
    pub tokens: Vec<TokenId>,
    /// Sum of log-probabilities of the generated tokens.
    pub log_prob: f64,
    /// Set when decoding stopped at the length cap before EOS.
    pub truncated: bool,
}

/// Encoder outputs of one source and the per-layer cross-attention keys and
/// values derived from them.
struct Source<F> {
    cross_kv: Vec<(Array2<F>, Array2<F>)>,
}

#[derive(Clone)]
struct Hyp<F> {
    src: usize,
    /// Per decoder layer, flat `(t, dim)` self-attention keys and values.
    k: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
    out: Vec<TokenId>,
    log_prob: f64,
}

impl<F: Scalar> Hyp<F> {
    fn last(&self) -> TokenId {
        self.out.last().copied().unwrap_or(BOS)
    }
}

fn allowed(step: usize, forced: Option<TokenId>, id: usize) -> bool {
    let id = id as TokenId;
    if step == 0 {
        match forced {
            Some(f) => id == f,
            None => is_lang_id(id),
        }
    } else {
        !matches!(id, PAD | BOS | SEP | MASK | LANG_F | LANG_E)
    }
}

/// Multi-head attention of one query row over `n` cached rows.
fn attend<F: Scalar>(q: &[F], k: &[F], v: &[F], n: usize, heads: usize, out: &mut [F], scores: &mut Vec<F>) {
    let d = q.len();
    let dh = d / heads;
    let scale = F::of(1.0 / (dh as f64).sqrt());
    for h in 0..heads {
        let ho = h * dh;
        scores.clear();
        let mut mx = F::neg_infinity();
        for j in 0..n {
            let s = dot(&q[ho..ho + dh], &k[j * d + ho..][..dh]) * scale;
            mx = mx.max(s);
            scores.push(s);
        }
        let mut sum = F::zero();
        for s in scores.iter_mut() {
            *s = (*s - mx).exp();
            sum += *s;
        }
        let o = &mut out[ho..ho + dh];
        o.iter_mut().for_each(|x| *x = F::zero());
        for (j, &s) in scores.iter().enumerate() {
            axpy(o, s / sum, &v[j * d + ho..][..dh]);
        }
    }
}

impl<F: Scalar> EditorModel<F> {
    fn prepare_sources(&self, inputs: &[(&[TokenId], &[TokenId])]) -> Result<Vec<Source<F>>> {
        let mut b = Batch::default();
        for (f, e) in inputs {
            b.push_encoder(&encode_input(f, e, self.config.max_len)?);
        }
        let enc = self.encode_eval(&b);
        let p = self.params();
        Ok(b.enc_spans
            .iter()
            .map(|&(s, l)| {
                let x = enc.slice(ndarray::s![s..s + l, ..]).to_owned();
                let cross_kv = self
                    .ids
                    .dec
                    .iter()
                    .map(|dl| (linear_fwd(p, dl.cross.k, &x), linear_fwd(p, dl.cross.v, &x)))
                    .collect();
                Source { cross_kv }
            })
            .collect())
    }

    /// Advances every hypothesis by one token (its last output) and returns
    /// log-probabilities over the vocabulary, one row per hypothesis.
    fn step(&self, hyps: &mut [Hyp<F>], sources: &[Source<F>]) -> Array2<F> {
        let cfg = &self.config;
        let p = self.params();
        let d = cfg.dim;
        let ids: Vec<TokenId> = hyps.iter().map(|h| h.last()).collect();
        let pos: Vec<usize> = hyps.iter().map(|h| h.out.len()).collect();
        let mut x = self.embed(&ids, &pos, None);
        let mut scores = Vec::new();
        let mut ctx = Array2::<F>::zeros((hyps.len(), d));
        for (li, l) in self.ids.dec.iter().enumerate() {
            let (h1, _) = ln_fwd(p, l.ln1, &x);
            let (q, k, v) = self.qkv(&l.self_attn, &h1);
            for (i, hyp) in hyps.iter_mut().enumerate() {
                hyp.k[li].extend(k.row(i).iter());
                hyp.v[li].extend(v.row(i).iter());
                let n = hyp.out.len() + 1;
                let out = ctx.row_mut(i).into_slice().unwrap();
                attend(q.row(i).as_slice().unwrap(), &hyp.k[li], &hyp.v[li], n, cfg.heads, out, &mut scores);
            }
            x += &linear_fwd(p, l.self_attn.o, &ctx);
            let (h2, _) = ln_fwd(p, l.ln2, &x);
            let qc = linear_fwd(p, l.cross.q, &h2);
            for (i, hyp) in hyps.iter().enumerate() {
                let (ck, cv) = &sources[hyp.src].cross_kv[li];
                let out = ctx.row_mut(i).into_slice().unwrap();
                attend(
                    qc.row(i).as_slice().unwrap(),
                    ck.as_slice().unwrap(),
                    cv.as_slice().unwrap(),
                    ck.nrows(),
                    cfg.heads,
                    out,
                    &mut scores,
                );
            }
            x += &linear_fwd(p, l.cross.o, &ctx);
            let (h3, _) = ln_fwd(p, l.ln3, &x);
            x += &self.ffn_eval(l.fc1, l.fc2, &h3);
        }
        let (h, _) = ln_fwd(p, self.ids.dec_ln, &x);
        let mut logits = self.logits(&h);
        for mut row in logits.rows_mut() {
            let mx = row.fold(F::neg_infinity(), |m, &z| m.max(z));
            let lse = mx + row.iter().map(|&z| (z - mx).exp()).sum::<F>().ln();
            row -= lse;
        }
        logits
    }

    fn qkv(&self, a: &AttnIds, h: &Array2<F>) -> (Array2<F>, Array2<F>, Array2<F>) {
        let p = self.params();
        (linear_fwd(p, a.q, h), linear_fwd(p, a.k, h), linear_fwd(p, a.v, h))
    }

    fn new_hyp(&self, src: usize) -> Hyp<F> {
        let n = self.config.layers;
        Hyp {
            src,
            k: vec![Vec::new(); n],
            v: vec![Vec::new(); n],
            out: Vec::new(),
            log_prob: 0.0,
        }
    }

    fn length_cap(&self, f: &[TokenId], e: &[TokenId], opts: &DecodeOptions) -> usize {
        let default = (2 * f.len().max(e.len()) + 10).min(self.config.max_len);
        opts.max_len.unwrap_or(default).clamp(2, self.config.max_len)
    }

    fn finish(h: &Hyp<F>, truncated: bool) -> Decoded {
        let body_end = if h.out.last() == Some(&EOS) { h.out.len() - 1 } else { h.out.len() };
        Decoded {
            lang: h.out[0],
            tokens: h.out[1..body_end].to_vec(),
            log_prob: h.log_prob,
            truncated,
        }
    }

    /// Greedy decoding of several inputs in lockstep.
    fn greedy(&self, inputs: &[(&[TokenId], &[TokenId])], opts: &DecodeOptions) -> Result<Vec<Decoded>> {
        let sources = self.prepare_sources(inputs)?;
        let caps: Vec<usize> = inputs.iter().map(|(f, e)| self.length_cap(f, e, opts)).collect();
        let mut active: Vec<Hyp<F>> = (0..inputs.len()).map(|i| self.new_hyp(i)).collect();
        let mut done: Vec<Option<Decoded>> = vec![None; inputs.len()];
        let mut t = 0;
        while !active.is_empty() {
            let lp = self.step(&mut active, &sources);
            let mut next = Vec::with_capacity(active.len());
            for (i, mut h) in active.into_iter().enumerate() {
                let row = lp.row(i);
                let (best, score) = row
                    .iter()
                    .enumerate()
                    .filter(|(id, _)| allowed(t, opts.forced_lang, *id))
                    .fold((0usize, F::neg_infinity()), |acc, (id, &s)| if s > acc.1 { (id, s) } else { acc });
                h.out.push(best as TokenId);
                h.log_prob += score.as_f64();
                let src = h.src;
                if best as TokenId == EOS && t > 0 {
                    done[src] = Some(Self::finish(&h, false));
                } else if h.out.len() >= caps[src] {
                    done[src] = Some(Self::finish(&h, true));
                } else {
                    next.push(h);
                }
            }
            active = next;
            t += 1;
        }
        Ok(done.into_iter().map(|d| d.expect("every input finishes")).collect())
    }

    /// Beam search with length-normalised final scores.
    fn beam_search(&self, f: &[TokenId], e: &[TokenId], opts: &DecodeOptions) -> Result<Decoded> {
        let k = opts.beam;
        let sources = self.prepare_sources(&[(f, e)])?;
        let cap = self.length_cap(f, e, opts);
        let mut active = vec![self.new_hyp(0)];
        let mut finished: Vec<Hyp<F>> = Vec::new();
        let norm = |h: &Hyp<F>| h.log_prob / h.out.len() as f64;
        for t in 0..cap {
            let lp = self.step(&mut active, &sources);
            let mut cands: Vec<(f64, usize, usize)> = Vec::new();
            for (hi, h) in active.iter().enumerate() {
                let row = lp.row(hi);
                let mut local: Vec<(f64, usize, usize)> = row
                    .iter()
                    .enumerate()
                    .filter(|(id, _)| allowed(t, opts.forced_lang, *id))
                    .map(|(id, &s)| (h.log_prob + s.as_f64(), hi, id))
                    .collect();
                local.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.2.cmp(&b.2)));
                local.truncate(k);
                cands.extend(local);
            }
            cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
            cands.truncate(k);
            let mut next = Vec::with_capacity(k);
            for (score, hi, id) in cands {
                let mut h = active[hi].clone();
                h.out.push(id as TokenId);
                h.log_prob = score;
                if id as TokenId == EOS && t > 0 {
                    finished.push(h);
                } else {
                    next.push(h);
                }
            }
            active = next;
            if finished.len() >= k || active.is_empty() {
                break;
            }
        }
        let pick = |hs: &[Hyp<F>]| -> Option<Hyp<F>> {
            hs.iter()
                .max_by(|a, b| norm(a).total_cmp(&norm(b)))
                .cloned()
        };
        match pick(&finished) {
            Some(h) => Ok(Self::finish(&h, false)),
            None => {
                let h = pick(&active).expect("beam keeps a hypothesis");
                Ok(Self::finish(&h, true))
            }
        }
    }

    #[cfg(test)]
    pub(crate) fn beam_search_for_test(&self, f: &[TokenId], e: &[TokenId]) -> Decoded {
        self.beam_search(f, e, &DecodeOptions::default()).unwrap()
    }

    /// Decodes one dual-sentence input.
    pub fn decode(&self, in_f: &[TokenId], in_e: &[TokenId], opts: &DecodeOptions) -> Result<Decoded> {
        Ok(self.decode_many(&[(in_f.to_vec(), in_e.to_vec())], opts)?.remove(0))
    }

    /// Decodes many inputs; results are independent of chunking and threads.
    pub fn decode_many(&self, inputs: &[(Vec<TokenId>, Vec<TokenId>)], opts: &DecodeOptions) -> Result<Vec<Decoded>> {
        if opts.beam == 0 {
            return Err(Error::InvalidArgument("beam must be at least 1".into()));
        }
        if let Some(f) = opts.forced_lang {
            if !is_lang_id(f) {
                return Err(Error::InvalidArgument(format!("forced id {f} is not a language id")));
            }
        }
        let chunks: Vec<Result<Vec<Decoded>>> = inputs
            .par_chunks(CHUNK)
            .map(|chunk| {
                let refs: Vec<(&[TokenId], &[TokenId])> =
                    chunk.iter().map(|(f, e)| (f.as_slice(), e.as_slice())).collect();
                if opts.beam == 1 {
                    self.greedy(&refs, opts)
                } else {
                    refs.iter().map(|(f, e)| self.beam_search(f, e, opts)).collect()
                }
            })
            .collect();
        let mut out = Vec::with_capacity(inputs.len());
        for c in chunks {
            out.extend(c?);
        }
        Ok(out)
    }
}

/// Outcome of a corpus-level decoding pass.
#[derive(Clone, Debug)]
pub struct RefineOutput {
    pub corpus: Corpus,
    /// Side whose text was replaced; `None` where the original pair was kept.
    pub replaced: Vec<Option<Side>>,
    pub failures: usize,
    pub truncated: usize,
}

fn rebuild(
    c: &Corpus,
    decoded: Vec<Result<Decoded>>,
    tok: &Tokenizer,
) -> Result<RefineOutput> {
    let mut out = c.empty_like();
    let mut replaced = Vec::with_capacity(c.len());
    let (mut failures, mut truncated) = (0, 0);
    for (pair, d) in c.pairs().iter().zip(decoded) {
        let attempt = d.and_then(|d| {
            truncated += usize::from(d.truncated);
            let text = tok.decode(&d.tokens);
            let (side, src, tgt) = if d.lang == LANG_E {
                (Side::Tgt, pair.src.text().to_string(), text)
            } else {
                (Side::Src, text, pair.tgt.text().to_string())
            };
            let mut one = c.empty_like();
            one.push_text(&src, &tgt, None)?;
            Ok((side, one.pairs()[0].clone()))
        });
        match attempt {
            Ok((side, p)) => {
                out.push(p)?;
                replaced.push(Some(side));
            }
            Err(_) => {
                failures += 1;
                let mut p = pair.clone();
                p.score = None;
                out.push(p)?;
                replaced.push(None);
            }
        }
    }
    Ok(RefineOutput {
        corpus: out,
        replaced,
        failures,
        truncated,
    })
}

fn decode_per_pair<F: Scalar>(
    model: &EditorModel<F>,
    inputs: Vec<(Vec<TokenId>, Vec<TokenId>)>,
    opts: &DecodeOptions,
) -> Vec<Result<Decoded>> {
    let max = model.config.max_len;
    let fits = |f: &Vec<TokenId>, e: &Vec<TokenId>| f.len() + 1 + e.len() <= max;
    let ok: Vec<usize> = (0..inputs.len()).filter(|&i| fits(&inputs[i].0, &inputs[i].1)).collect();
    let batch: Vec<_> = ok.iter().map(|&i| inputs[i].clone()).collect();
    let mut results: Vec<Result<Decoded>> = inputs
        .iter()
        .map(|(f, e)| {
            Err(Error::SequenceTooLong {
                len: f.len() + 1 + e.len(),
                max,
            })
        })
        .collect();
    match model.decode_many(&batch, opts) {
        Ok(ds) => {
            for (i, d) in ok.into_iter().zip(ds) {
                results[i] = Ok(d);
            }
        }
        Err(e) => {
            let msg = e.to_string();
            for i in ok {
                results[i] = Err(Error::InvalidArgument(msg.clone()));
            }
        }
    }
    results
}

/// Rewrites each pair with the editor: the decoded side replaces the side
/// named by the generated language id. Scores are dropped; pairs that fail to
/// decode pass through unchanged.
pub fn refine_corpus<F: Scalar>(model: &EditorModel<F>, tok: &Tokenizer, c: &Corpus, beam: usize) -> Result<RefineOutput> {
    let inputs = c
        .pairs()
        .iter()
        .map(|p| (tok.encode(p.src.text()), tok.encode(p.tgt.text())))
        .collect();
    let opts = DecodeOptions {
        beam,
        ..Default::default()
    };
    rebuild(c, decode_per_pair(model, inputs, &opts), tok)
}

/// Regenerates every source sentence from its target with a translation-only
/// model, keeping targets verbatim.
pub fn backtranslate_corpus<F: Scalar>(model: &EditorModel<F>, tok: &Tokenizer, c: &Corpus, beam: usize) -> Result<RefineOutput> {
    let inputs = c
        .pairs()
        .iter()
        .map(|p| (vec![MASK], tok.encode(p.tgt.text())))
        .collect();
    let opts = DecodeOptions {
        beam,
        forced_lang: Some(LANG_F),
        max_len: None,
    };
    rebuild(c, decode_per_pair(model, inputs, &opts), tok)
}

/// Translates source sentences into the target language. Inputs that cannot
/// be decoded yield an empty hypothesis.
pub fn translate<F: Scalar>(model: &EditorModel<F>, tok: &Tokenizer, sources: &[&str], beam: usize) -> Result<Vec<String>> {
    let inputs = sources.iter().map(|s| (tok.encode(s), vec![MASK])).collect();
    let opts = DecodeOptions {
        beam,
        forced_lang: Some(LANG_E),
        max_len: None,
    };
    Ok(decode_per_pair(model, inputs, &opts)
        .into_iter()
        .map(|d| d.map(|d| tok.decode(&d.tokens)).unwrap_or_default())
        .collect())
}
