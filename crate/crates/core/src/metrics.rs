//! Corpus-level BLEU and chrF, TER-style token labels, edit statistics and
//! lexical diversity.

use std::collections::{HashMap, HashSet};
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Side};
use crate::error::{Error, Result};

pub use crate::model::perplexity;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuReport {
    pub score: f64,
    pub ngram_precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
    /// Whether add-one smoothing was applied to orders above 1.
    pub smoothed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BleuOptions {
    pub max_n: usize,
    /// Add-one smoothing of orders `n > 1`, applied only when some order has
    /// no matches.
    pub smooth: bool,
}

impl Default for BleuOptions {
    fn default() -> Self {
        BleuOptions { max_n: 4, smooth: true }
    }
}

fn ngram_counts<T: Hash + Eq + Clone>(toks: &[T], n: usize) -> HashMap<&[T], usize> {
    let mut m = HashMap::new();
    if toks.len() >= n {
        for w in toks.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

/// Clipped matches and hypothesis n-gram total for one order.
fn clipped<T: Hash + Eq + Clone>(hyp: &[T], rf: &[T], n: usize) -> (usize, usize) {
    let h = ngram_counts(hyp, n);
    let r = ngram_counts(rf, n);
    let matches = h
        .iter()
        .map(|(g, &c)| c.min(r.get(g).copied().unwrap_or(0)))
        .sum();
    (matches, hyp.len().saturating_sub(n - 1))
}

fn check_lengths(h: usize, r: usize) -> Result<()> {
    if h != r {
        return Err(Error::LengthMismatch(h, r));
    }
    if h == 0 {
        return Err(Error::EmptyHypSet);
    }
    Ok(())
}

/// Corpus BLEU over pre-tokenized sentences.
pub fn bleu<S: AsRef<str>>(hyps: &[Vec<S>], refs: &[Vec<S>], opts: BleuOptions) -> Result<BleuReport> {
    check_lengths(hyps.len(), refs.len())?;
    if opts.max_n == 0 {
        return Err(Error::InvalidArgument("max_n must be positive".into()));
    }
    let mut matches = vec![0usize; opts.max_n];
    let mut totals = vec![0usize; opts.max_n];
    let (mut hyp_len, mut ref_len) = (0, 0);
    for (h, r) in hyps.iter().zip(refs) {
        let h: Vec<&str> = h.iter().map(AsRef::as_ref).collect();
        let r: Vec<&str> = r.iter().map(AsRef::as_ref).collect();
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=opts.max_n {
            let (m, t) = clipped(&h, &r, n);
            matches[n - 1] += m;
            totals[n - 1] += t;
        }
    }
    let smoothed = opts.smooth && matches.contains(&0);
    let precisions: Vec<f64> = (0..opts.max_n)
        .map(|i| {
            if smoothed && i > 0 {
                (matches[i] + 1) as f64 / (totals[i] + 1) as f64
            } else if totals[i] == 0 {
                0.0
            } else {
                matches[i] as f64 / totals[i] as f64
            }
        })
        .collect();
    let bp = if hyp_len == 0 {
        0.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp().min(1.0)
    };
    let score = if precisions.contains(&0.0) {
        0.0
    } else {
        let mean_log = precisions.iter().map(|p| p.ln()).sum::<f64>() / opts.max_n as f64;
        100.0 * bp * mean_log.exp()
    };
    Ok(BleuReport {
        score,
        ngram_precisions: precisions,
        brevity_penalty: bp,
        hyp_len,
        ref_len,
        smoothed,
    })
}

/// BLEU on whitespace tokens of raw text.
pub fn bleu_text<S: AsRef<str>>(hyps: &[S], refs: &[S], opts: BleuOptions) -> Result<BleuReport> {
    let split = |v: &[S]| -> Vec<Vec<String>> {
        v.iter()
            .map(|s| s.as_ref().split_whitespace().map(str::to_string).collect())
            .collect()
    };
    bleu(&split(hyps), &split(refs), opts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChrFReport {
    pub score: f64,
    pub precision: f64,
    pub recall: f64,
    pub n_max: usize,
    pub beta: f64,
}

/// Corpus chrF: character n-grams of orders `1..=n` with whitespace removed,
/// counts summed over the corpus, precision and recall averaged uniformly over
/// the orders that occur on either side.
pub fn chrf<S: AsRef<str>>(hyps: &[S], refs: &[S], n: usize, beta: f64) -> Result<ChrFReport> {
    check_lengths(hyps.len(), refs.len())?;
    if n == 0 || !(beta > 0.0) {
        return Err(Error::InvalidArgument("chrF needs n >= 1 and beta > 0".into()));
    }
    let mut matches = vec![0usize; n];
    let mut hyp_tot = vec![0usize; n];
    let mut ref_tot = vec![0usize; n];
    for (h, r) in hyps.iter().zip(refs) {
        let h: Vec<char> = h.as_ref().chars().filter(|c| !c.is_whitespace()).collect();
        let r: Vec<char> = r.as_ref().chars().filter(|c| !c.is_whitespace()).collect();
        for k in 1..=n {
            let (m, t) = clipped(&h, &r, k);
            matches[k - 1] += m;
            hyp_tot[k - 1] += t;
            ref_tot[k - 1] += r.len().saturating_sub(k - 1);
        }
    }
    let (mut p_sum, mut r_sum, mut orders) = (0.0, 0.0, 0usize);
    for k in 0..n {
        if hyp_tot[k] == 0 && ref_tot[k] == 0 {
            continue;
        }
        orders += 1;
        if hyp_tot[k] > 0 {
            p_sum += matches[k] as f64 / hyp_tot[k] as f64;
        }
        if ref_tot[k] > 0 {
            r_sum += matches[k] as f64 / ref_tot[k] as f64;
        }
    }
    let (p, r) = if orders == 0 {
        (0.0, 0.0)
    } else {
        (p_sum / orders as f64, r_sum / orders as f64)
    };
    let b2 = beta * beta;
    let score = if p + r > 0.0 {
        100.0 * (1.0 + b2) * p * r / (b2 * p + r)
    } else {
        0.0
    };
    Ok(ChrFReport {
        score,
        precision: p,
        recall: r,
        n_max: n,
        beta,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TerLabel {
    /// Correct: hypothesis token equals the aligned reference token.
    C,
    /// Substitution.
    S,
    /// Deletion: a reference token missing from the hypothesis.
    D,
    /// Insertion: a hypothesis token absent from the reference.
    I,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TerLabelStats {
    pub c: usize,
    pub s: usize,
    pub d: usize,
    pub i: usize,
}

impl TerLabelStats {
    pub fn edits(&self) -> usize {
        self.s + self.d + self.i
    }

    pub fn add(&mut self, o: &TerLabelStats) {
        self.c += o.c;
        self.s += o.s;
        self.d += o.d;
        self.i += o.i;
    }
}

/// Levenshtein alignment (unit costs, no shifts) of `hyp` against `rf`.
/// Traceback prefers match, then substitution, deletion, insertion.
pub fn ter_labels<T: PartialEq>(hyp: &[T], rf: &[T]) -> (Vec<TerLabel>, TerLabelStats) {
    let (m, n) = (hyp.len(), rf.len());
    let w = n + 1;
    let mut dp = vec![0usize; (m + 1) * w];
    for i in 0..=m {
        dp[i * w] = i;
    }
    for j in 0..=n {
        dp[j] = j;
    }
    for i in 1..=m {
        for j in 1..=n {
            let sub = dp[(i - 1) * w + j - 1] + usize::from(hyp[i - 1] != rf[j - 1]);
            let ins = dp[(i - 1) * w + j] + 1;
            let del = dp[i * w + j - 1] + 1;
            dp[i * w + j] = sub.min(ins).min(del);
        }
    }
    let mut labels = Vec::with_capacity(m.max(n));
    let mut stats = TerLabelStats::default();
    let (mut i, mut j) = (m, n);
    while i > 0 || j > 0 {
        let cur = dp[i * w + j];
        if i > 0 && j > 0 && hyp[i - 1] == rf[j - 1] && cur == dp[(i - 1) * w + j - 1] {
            labels.push(TerLabel::C);
            stats.c += 1;
            i -= 1;
            j -= 1;
        } else if i > 0 && j > 0 && cur == dp[(i - 1) * w + j - 1] + 1 {
            labels.push(TerLabel::S);
            stats.s += 1;
            i -= 1;
            j -= 1;
        } else if j > 0 && cur == dp[i * w + j - 1] + 1 {
            labels.push(TerLabel::D);
            stats.d += 1;
            j -= 1;
        } else {
            labels.push(TerLabel::I);
            stats.i += 1;
            i -= 1;
        }
    }
    labels.reverse();
    (labels, stats)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EditFractionReport {
    pub pct_src_edited: f64,
    pub pct_tgt_edited: f64,
    /// Pairs with at least one edited side.
    pub pct_both: f64,
    pub pairs: usize,
    /// Label totals over edited comparisons, source then target side.
    pub src_labels: TerLabelStats,
    pub tgt_labels: TerLabelStats,
}

/// Share of pairs whose source, target, or either side differs from the
/// original in whitespace tokens.
pub fn edited_fraction(original: &Corpus, refined: &Corpus) -> Result<EditFractionReport> {
    if original.len() != refined.len() {
        return Err(Error::LengthMismatch(original.len(), refined.len()));
    }
    let mut r = EditFractionReport {
        pairs: original.len(),
        ..Default::default()
    };
    if original.is_empty() {
        return Ok(r);
    }
    let (mut src, mut tgt, mut both) = (0usize, 0usize, 0usize);
    for (o, x) in original.pairs().iter().zip(refined.pairs()) {
        let mut edited = [false; 2];
        for (k, side) in [Side::Src, Side::Tgt].into_iter().enumerate() {
            let a: Vec<&str> = x.side(side).text().split_whitespace().collect();
            let b: Vec<&str> = o.side(side).text().split_whitespace().collect();
            let (_, st) = ter_labels(&a, &b);
            edited[k] = st.edits() >= 1;
            match side {
                Side::Src => r.src_labels.add(&st),
                Side::Tgt => r.tgt_labels.add(&st),
            }
        }
        src += usize::from(edited[0]);
        tgt += usize::from(edited[1]);
        both += usize::from(edited[0] || edited[1]);
    }
    let pct = |k: usize| 100.0 * k as f64 / original.len() as f64;
    r.pct_src_edited = pct(src);
    r.pct_tgt_edited = pct(tgt);
    r.pct_both = pct(both);
    Ok(r)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TypeTokenRatio {
    pub tokens: usize,
    pub types: usize,
    /// `100 * types / tokens`, 0 when there are no tokens.
    pub ratio: f64,
}

pub fn type_token_ratio<'a, I>(texts: I) -> TypeTokenRatio
where
    I: IntoIterator<Item = &'a str>,
{
    let mut tokens = 0;
    let mut types = HashSet::new();
    for t in texts {
        for w in t.split_whitespace() {
            tokens += 1;
            types.insert(w);
        }
    }
    let ratio = if tokens == 0 {
        0.0
    } else {
        100.0 * types.len() as f64 / tokens as f64
    };
    TypeTokenRatio {
        tokens,
        types: types.len(),
        ratio,
    }
}
