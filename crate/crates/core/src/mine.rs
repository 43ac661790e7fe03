//! Sentence embeddings, exact cosine kNN and mining of imperfect translation
//! candidates.
//!
//! Candidate mining ranks by raw cosine. The ratio margin is only used to
//! attach alignment scores to generated corpora.

use std::cmp::Ordering;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Lang, Sentence, Side};
use crate::error::{Error, Result};

const NORM_TOL: f64 = 1e-5;
const SHARD_ROWS: usize = 4096;

/// Unit-norm `f32` vector.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    /// Normalizes `values` to unit length.
    pub fn normalized(values: Vec<f32>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue(i));
        }
        let norm = values.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NonFiniteValue(0));
        }
        Ok(EmbeddingVector(
            values.into_iter().map(|v| (v as f64 / norm) as f32).collect(),
        ))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt()
    }
}

fn dot(u: &[f32], v: &[f32]) -> f64 {
    u.iter().zip(v).map(|(&a, &b)| a as f64 * b as f64).sum()
}

/// Cosine of two unit vectors, clamped to [-1, 1]. Never returns `-0.0`, so
/// ranking with `total_cmp` agrees with numeric order on ties at zero.
pub fn cosine(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::DimMismatch(u.dim(), v.dim()));
    }
    Ok(dot(&u.0, &v.0).clamp(-1.0, 1.0) + 0.0)
}

pub trait Embedder: Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> Result<EmbeddingVector>;
}

/// Hashed bag of character 3- and 4-grams, a stand-in for a multilingual
/// sentence encoder. Text is padded with one space on each side.
///
/// With `toy_lexicon` set, toy-language words `f<n>` and `e<n>` are both folded
/// to `<n>` before hashing, so translations land close to each other the way
/// they would under a real cross-lingual encoder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HashEmbedder {
    pub dim: usize,
    pub min_n: usize,
    pub max_n: usize,
    #[serde(default)]
    pub toy_lexicon: bool,
}

impl Default for HashEmbedder {
    fn default() -> Self {
        HashEmbedder {
            dim: 256,
            min_n: 3,
            max_n: 4,
            toy_lexicon: false,
        }
    }
}

fn fold_toy_word(w: &str) -> &str {
    match w.strip_prefix(['f', 'e']) {
        Some(n) if !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()) => n,
        _ => w,
    }
}

impl HashEmbedder {
    pub fn with_dim(dim: usize) -> Self {
        HashEmbedder {
            dim,
            ..Self::default()
        }
    }

    pub fn toy(dim: usize) -> Self {
        HashEmbedder {
            dim,
            toy_lexicon: true,
            ..Self::default()
        }
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

impl Embedder for HashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        if text.trim().is_empty() {
            return Err(Error::InvalidArgument("cannot embed empty text".into()));
        }
        let padded = if self.toy_lexicon {
            let words: Vec<&str> = text.split_whitespace().map(fold_toy_word).collect();
            format!(" {} ", words.join(" "))
        } else {
            format!(" {} ", text.trim())
        };
        let bounds: Vec<usize> = padded
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(padded.len()))
            .collect();
        let n_chars = bounds.len() - 1;
        let mut counts = vec![0f32; self.dim];
        for n in self.min_n..=self.max_n {
            for start in 0..n_chars.saturating_sub(n - 1) {
                let gram = &padded.as_bytes()[bounds[start]..bounds[start + n]];
                counts[(fnv1a(gram) % self.dim as u64) as usize] += 1.0;
            }
        }
        if counts.iter().all(|&c| c == 0.0) {
            // shorter than the smallest n-gram
            counts[(fnv1a(padded.as_bytes()) % self.dim as u64) as usize] = 1.0;
        }
        EmbeddingVector::normalized(counts)
    }
}

/// Looks sentences up in precomputed vectors, e.g. ones read by [`load_embeddings`].
pub struct LookupEmbedder {
    dim: usize,
    table: HashMap<String, EmbeddingVector>,
}

impl LookupEmbedder {
    pub fn new(texts: &[&str], vectors: &[EmbeddingVector]) -> Result<Self> {
        if texts.len() != vectors.len() {
            return Err(Error::LengthMismatch(texts.len(), vectors.len()));
        }
        let dim = vectors.first().map_or(0, EmbeddingVector::dim);
        let mut table = HashMap::new();
        for (t, v) in texts.iter().zip(vectors) {
            if v.dim() != dim {
                return Err(Error::DimMismatch(v.dim(), dim));
            }
            table.entry(t.to_string()).or_insert_with(|| v.clone());
        }
        Ok(LookupEmbedder { dim, table })
    }
}

impl Embedder for LookupEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector> {
        self.table
            .get(text)
            .cloned()
            .ok_or_else(|| Error::InvalidArgument(format!("no embedding for {text:?}")))
    }
}

/// Reads raw little-endian `f32` rows of width `dim` and re-normalizes them.
pub fn load_embeddings(path: &Path, dim: usize) -> Result<Vec<EmbeddingVector>> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    parse_embeddings(&bytes, dim)
}

pub fn parse_embeddings(bytes: &[u8], dim: usize) -> Result<Vec<EmbeddingVector>> {
    let row = 4 * dim;
    if dim == 0 || !bytes.len().is_multiple_of(row) {
        return Err(Error::BadLength {
            len: bytes.len(),
            row,
        });
    }
    let values: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteValue(i));
    }
    values
        .chunks_exact(dim)
        .enumerate()
        .map(|(r, chunk)| {
            EmbeddingVector::normalized(chunk.to_vec()).map_err(|_| Error::NonFiniteValue(r * dim))
        })
        .collect()
}

pub fn write_embeddings<W: Write>(vectors: &[EmbeddingVector], mut out: W) -> std::io::Result<()> {
    for v in vectors {
        for x in &v.0 {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()
}

/// Immutable set of unit vectors with their sentences.
#[derive(Clone, Debug)]
pub struct EmbeddingIndex {
    dim: usize,
    data: Vec<f32>,
    payloads: Vec<Sentence>,
}

/// Position and cosine of one retrieved entry.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub cosine: f64,
}

/// Descending cosine, then ascending index.
fn rank(a: &Neighbor, b: &Neighbor) -> Ordering {
    b.cosine
        .total_cmp(&a.cosine)
        .then_with(|| a.index.cmp(&b.index))
}

impl EmbeddingIndex {
    pub fn new(payloads: Vec<Sentence>, vectors: Vec<EmbeddingVector>, dim: usize) -> Result<Self> {
        if payloads.len() != vectors.len() {
            return Err(Error::LengthMismatch(payloads.len(), vectors.len()));
        }
        let mut data = Vec::with_capacity(vectors.len() * dim);
        for v in &vectors {
            if v.dim() != dim {
                return Err(Error::DimMismatch(v.dim(), dim));
            }
            if (v.norm() - 1.0).abs() > NORM_TOL {
                return Err(Error::InvalidArgument("index vectors must be unit-norm".into()));
            }
            data.extend_from_slice(&v.0);
        }
        Ok(EmbeddingIndex {
            dim,
            data,
            payloads,
        })
    }

    /// Embeds every sentence with `embedder`.
    pub fn build(sentences: Vec<Sentence>, embedder: &dyn Embedder) -> Result<Self> {
        let vectors = sentences
            .par_iter()
            .map(|s| embedder.embed(s.text()))
            .collect::<Result<Vec<_>>>()?;
        EmbeddingIndex::new(sentences, vectors, embedder.dim())
    }

    /// Index over the distinct sentences of one corpus side (first occurrence order).
    pub fn from_corpus_side(corpora: &[&Corpus], side: Side, embedder: &dyn Embedder) -> Result<Self> {
        let mut seen = std::collections::HashSet::new();
        let mut sentences = Vec::new();
        for c in corpora {
            for p in c.pairs() {
                let s = p.side(side);
                if seen.insert(s.text().to_string()) {
                    sentences.push(s.clone());
                }
            }
        }
        EmbeddingIndex::build(sentences, embedder)
    }

    pub fn len(&self) -> usize {
        self.payloads.len()
    }

    pub fn is_empty(&self) -> bool {
        self.payloads.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn payload(&self, i: usize) -> &Sentence {
        &self.payloads[i]
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Exact top-`k` by cosine. Shards are scanned in parallel and merged with
    /// the same total order, so the result does not depend on thread count.
    pub fn knn(&self, query: &EmbeddingVector, k: usize) -> Result<Vec<Neighbor>> {
        if self.is_empty() {
            return Err(Error::EmptyIndex);
        }
        if k == 0 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        if query.dim() != self.dim {
            return Err(Error::DimMismatch(query.dim(), self.dim));
        }
        let q = query.as_slice();
        let mut merged: Vec<Neighbor> = self
            .data
            .par_chunks(SHARD_ROWS * self.dim)
            .enumerate()
            .flat_map_iter(|(shard, rows)| {
                let base = shard * SHARD_ROWS;
                let mut local: Vec<Neighbor> = rows
                    .chunks_exact(self.dim)
                    .enumerate()
                    .map(|(r, v)| Neighbor {
                        index: base + r,
                        cosine: dot(q, v).clamp(-1.0, 1.0) + 0.0,
                    })
                    .collect();
                if local.len() > k {
                    local.select_nth_unstable_by(k - 1, rank);
                    local.truncate(k);
                }
                local
            })
            .collect();
        merged.sort_unstable_by(rank);
        merged.truncate(k);
        Ok(merged)
    }
}

/// One mined sentence with its similarity to the query.
#[derive(Clone, Debug, PartialEq)]
pub struct MinedCandidate {
    pub sentence: Sentence,
    pub cosine: f64,
    pub is_original: bool,
}

pub fn knn(query: &EmbeddingVector, index: &EmbeddingIndex, k: usize) -> Result<Vec<MinedCandidate>> {
    Ok(index
        .knn(query, k)?
        .into_iter()
        .map(|n| MinedCandidate {
            sentence: index.payload(n.index).clone(),
            cosine: n.cosine,
            is_original: false,
        })
        .collect())
}

/// Ratio margin: `cos(x, y)` over the mean of the average `k`-NN cosines of
/// `x` in `idx_y` and of `y` in `idx_x`.
pub fn margin_score(
    x: &EmbeddingVector,
    y: &EmbeddingVector,
    idx_x: &EmbeddingIndex,
    idx_y: &EmbeddingIndex,
    k: usize,
) -> Result<f64> {
    let cos_xy = cosine(x, y)?;
    let fwd = idx_y.knn(x, k)?;
    let bwd = idx_x.knn(y, k)?;
    let mean = |ns: &[Neighbor]| ns.iter().map(|n| n.cosine).sum::<f64>() / ns.len() as f64;
    let denom = mean(&fwd) / 2.0 + mean(&bwd) / 2.0;
    if denom <= 1e-9 {
        return Err(Error::DivisionDegenerate(denom));
    }
    Ok(cos_xy / denom)
}

/// Margin score of every pair of `c` against the two indices.
pub fn margin_scores(
    c: &Corpus,
    idx_src: &EmbeddingIndex,
    idx_tgt: &EmbeddingIndex,
    k: usize,
    embedder: &dyn Embedder,
) -> Result<Vec<f64>> {
    c.pairs()
        .par_iter()
        .map(|p| {
            let x = embedder.embed(p.src.text())?;
            let y = embedder.embed(p.tgt.text())?;
            margin_score(&x, &y, idx_src, idx_tgt, k)
        })
        .collect()
}

/// Mined variants for one pair: `src` holds candidate rewrites of the source
/// (retrieved with the target as query), `tgt` candidate rewrites of the target.
#[derive(Clone, Debug, PartialEq)]
pub struct PairCandidates {
    pub src: Vec<MinedCandidate>,
    pub tgt: Vec<MinedCandidate>,
}

/// For each pair `(x_f, x_e)`: the `k` nearest source-language sentences to
/// `x_e` and the `k` nearest target-language sentences to `x_f`. Retrieved
/// copies of the pair's own sentences are kept and flagged `is_original`.
pub fn mine_candidates(
    c: &Corpus,
    idx_src: &EmbeddingIndex,
    idx_tgt: &EmbeddingIndex,
    k: usize,
    embedder: &dyn Embedder,
) -> Result<Vec<PairCandidates>> {
    c.pairs()
        .par_iter()
        .map(|p| {
            let mut src = knn(&embedder.embed(p.tgt.text())?, idx_src, k)?;
            let mut tgt = knn(&embedder.embed(p.src.text())?, idx_tgt, k)?;
            for cand in &mut src {
                cand.is_original = cand.sentence.text() == p.src.text();
            }
            for cand in &mut tgt {
                cand.is_original = cand.sentence.text() == p.tgt.text();
            }
            Ok(PairCandidates { src, tgt })
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct CandJson {
    text: String,
    cos: f64,
    orig: bool,
}

#[derive(Serialize, Deserialize)]
struct PairJson {
    i: usize,
    src: Vec<CandJson>,
    tgt: Vec<CandJson>,
}

fn to_json(cands: &[MinedCandidate]) -> Vec<CandJson> {
    cands
        .iter()
        .map(|c| CandJson {
            text: c.sentence.text().to_string(),
            cos: c.cosine,
            orig: c.is_original,
        })
        .collect()
}

/// One JSON object per pair: `{"i", "src": [{"text","cos","orig"}..], "tgt": [..]}`.
pub fn write_candidates<W: Write>(cands: &[PairCandidates], out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    for (i, pc) in cands.iter().enumerate() {
        let row = PairJson {
            i,
            src: to_json(&pc.src),
            tgt: to_json(&pc.tgt),
        };
        serde_json::to_writer(&mut out, &row)?;
        out.write_all(b"\n").map_err(|e| Error::io("<candidates>", e))?;
    }
    out.flush().map_err(|e| Error::io("<candidates>", e))
}

pub fn read_candidates<R: Read>(input: R, src_lang: &Lang, tgt_lang: &Lang) -> Result<Vec<PairCandidates>> {
    let from_json = |v: Vec<CandJson>, lang: &Lang| -> Result<Vec<MinedCandidate>> {
        v.into_iter()
            .map(|c| {
                Ok(MinedCandidate {
                    sentence: Sentence::new(&c.text, lang.clone())?,
                    cosine: c.cos,
                    is_original: c.orig,
                })
            })
            .collect()
    };
    let mut out = Vec::new();
    for (n, line) in BufReader::new(input).lines().enumerate() {
        let line = line.map_err(|e| Error::io("<candidates>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: PairJson = serde_json::from_str(&line)?;
        if row.i != out.len() {
            return Err(Error::Format {
                what: "candidate dump",
                detail: format!("line {} has i={}, expected {}", n + 1, row.i, out.len()),
            });
        }
        out.push(PairCandidates {
            src: from_json(row.src, src_lang)?,
            tgt: from_json(row.tgt, tgt_lang)?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{gen_synthetic, NoiseSpec};

    fn v(xs: &[f32]) -> EmbeddingVector {
        EmbeddingVector::normalized(xs.to_vec()).unwrap()
    }

    fn lang(s: &str) -> Lang {
        Lang::new(s).unwrap()
    }

    #[test]
    fn embedding_is_deterministic_and_self_similar() {
        let e = HashEmbedder::default();
        let a = e.embed("the cat sat").unwrap();
        let b = e.embed("the cat sat").unwrap();
        assert_eq!(a, b);
        assert!((cosine(&a, &b).unwrap() - 1.0).abs() < 1e-6);
        assert!((a.norm() - 1.0).abs() < 1e-5);
    }

    #[test]
    fn near_duplicates_are_closer_than_unrelated_text() {
        let e = HashEmbedder::default();
        let base = e.embed("the cat sat").unwrap();
        let near = cosine(&base, &e.embed("the cat sat down").unwrap()).unwrap();
        let far = cosine(&base, &e.embed("zqxv wblur frop").unwrap()).unwrap();
        assert!(near > far, "{near} <= {far}");
    }

    #[test]
    fn cosine_examples() {
        let u = v(&[0.6, 0.8]);
        let w = v(&[0.8, 0.6]);
        assert!((cosine(&u, &w).unwrap() - 0.96).abs() < 1e-6);
        assert!((cosine(&u, &u).unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(cosine(&v(&[1.0, 0.0]), &v(&[0.0, 1.0])).unwrap(), 0.0);
        assert!(matches!(
            cosine(&u, &v(&[1.0, 0.0, 0.0])),
            Err(Error::DimMismatch(2, 3))
        ));
    }

    #[test]
    fn embedding_file_parsing() {
        let floats: Vec<f32> = vec![3.0, 4.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let bytes: Vec<u8> = floats.iter().flat_map(|f| f.to_le_bytes()).collect();
        let vs = parse_embeddings(&bytes, 4).unwrap();
        assert_eq!(vs.len(), 2);
        assert!((vs[0].as_slice()[0] - 0.6).abs() < 1e-7);
        assert!((vs[0].as_slice()[1] - 0.8).abs() < 1e-7);

        let mut nine = bytes.clone();
        nine.extend_from_slice(&1f32.to_le_bytes());
        assert!(matches!(parse_embeddings(&nine, 4), Err(Error::BadLength { .. })));

        let mut bad = bytes.clone();
        bad[20..24].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(parse_embeddings(&bad, 4), Err(Error::NonFiniteValue(5))));
    }

    fn index_of(vs: &[EmbeddingVector]) -> EmbeddingIndex {
        let payloads = (0..vs.len())
            .map(|i| Sentence::new(&format!("s{i}"), lang("e")).unwrap())
            .collect();
        EmbeddingIndex::new(payloads, vs.to_vec(), vs[0].dim()).unwrap()
    }

    #[test]
    fn knn_basics() {
        let vs = vec![v(&[1.0, 0.0]), v(&[0.6, 0.8]), v(&[0.0, 1.0])];
        let idx = index_of(&vs);
        let top = idx.knn(&vs[1], 1).unwrap();
        assert_eq!(top[0].index, 1);
        assert!((top[0].cosine - 1.0).abs() < 1e-6);
        let all = idx.knn(&v(&[1.0, 0.1]), 10).unwrap();
        assert_eq!(all.iter().map(|n| n.index).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn knn_ties_go_to_lowest_index() {
        let vs = vec![v(&[0.0, 1.0]), v(&[1.0, 0.0]), v(&[1.0, 0.0]), v(&[1.0, 0.0])];
        let idx = index_of(&vs);
        let top = idx.knn(&v(&[1.0, 0.0]), 2).unwrap();
        assert_eq!(top.iter().map(|n| n.index).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn knn_errors() {
        let idx = EmbeddingIndex::new(vec![], vec![], 2).unwrap();
        assert!(matches!(idx.knn(&v(&[1.0, 0.0]), 1), Err(Error::EmptyIndex)));
    }

    #[test]
    fn margin_examples() {
        // every neighbour cosine equals cos(x, y) -> ratio 1
        let x = v(&[1.0, 0.0]);
        let y = v(&[1.0, 0.0]);
        let ix = index_of(&[v(&[1.0, 0.0])]);
        let iy = index_of(&[v(&[1.0, 0.0])]);
        assert!((margin_score(&x, &y, &ix, &iy, 1).unwrap() - 1.0).abs() < 1e-9);

        // cos(x,y) = 0.9; each side's neighbours average 0.45 -> 2.0
        let x = v(&[1.0, 0.0]);
        let y = v(&[0.9, (1.0f32 - 0.81).sqrt()]);
        let c45 = |theta_from: &EmbeddingVector| {
            // unit vector with cosine 0.45 to `theta_from` (2-D rotation)
            let (a, b) = (theta_from.as_slice()[0] as f64, theta_from.as_slice()[1] as f64);
            let (c, s) = (0.45f64, (1.0 - 0.45f64 * 0.45).sqrt());
            v(&[(a * c - b * s) as f32, (a * s + b * c) as f32])
        };
        let iy = index_of(&[c45(&x), c45(&x)]);
        let ix = index_of(&[c45(&y)]);
        let m = margin_score(&x, &y, &ix, &iy, 2).unwrap();
        assert!((m - 2.0).abs() < 1e-5, "{m}");

        let z = v(&[1.0, 0.0]);
        let orth = index_of(&[v(&[0.0, 1.0])]);
        assert!(matches!(
            margin_score(&z, &z, &orth, &orth, 1),
            Err(Error::DivisionDegenerate(_))
        ));
    }

    #[test]
    fn mining_flags_originals() {
        let (c, _) = gen_synthetic(30, 50, (3, 6), &NoiseSpec::zero(0), 3).unwrap();
        let e = HashEmbedder::toy(256);
        let is = EmbeddingIndex::from_corpus_side(&[&c], Side::Src, &e).unwrap();
        let it = EmbeddingIndex::from_corpus_side(&[&c], Side::Tgt, &e).unwrap();
        let cands = mine_candidates(&c, &is, &it, 3, &e).unwrap();
        assert_eq!(cands.len(), c.len());
        for (p, pc) in c.pairs().iter().zip(&cands) {
            assert_eq!(pc.src.len(), 3.min(is.len()));
            assert_eq!(pc.tgt.len(), 3.min(it.len()));
            for cand in pc.tgt.iter() {
                assert_eq!(cand.is_original, cand.sentence.text() == p.tgt.text());
            }
        }
        // with lexicon folding the original target is usually the best
        // cross-lingual match
        let hits = c
            .pairs()
            .iter()
            .zip(&cands)
            .filter(|(_, pc)| pc.tgt[0].is_original)
            .count();
        assert!(hits * 10 >= c.len() * 8, "{hits}");
    }

    #[test]
    fn single_entry_indices_yield_only_originals() {
        let (c, _) = gen_synthetic(1, 10, (3, 3), &NoiseSpec::zero(0), 1).unwrap();
        let e = HashEmbedder::default();
        let is = EmbeddingIndex::from_corpus_side(&[&c], Side::Src, &e).unwrap();
        let it = EmbeddingIndex::from_corpus_side(&[&c], Side::Tgt, &e).unwrap();
        let cands = mine_candidates(&c, &is, &it, 1, &e).unwrap();
        assert!(cands[0].src[0].is_original && cands[0].tgt[0].is_original);
    }

    #[test]
    fn candidate_dump_round_trip() {
        let (c, _) = gen_synthetic(5, 10, (2, 4), &NoiseSpec::zero(0), 2).unwrap();
        let e = HashEmbedder::with_dim(64);
        let is = EmbeddingIndex::from_corpus_side(&[&c], Side::Src, &e).unwrap();
        let it = EmbeddingIndex::from_corpus_side(&[&c], Side::Tgt, &e).unwrap();
        let cands = mine_candidates(&c, &is, &it, 2, &e).unwrap();
        let mut buf = Vec::new();
        write_candidates(&cands, &mut buf).unwrap();
        let back = read_candidates(&buf[..], c.src_lang(), c.tgt_lang()).unwrap();
        assert_eq!(back, cands);
        let first: serde_json::Value =
            serde_json::from_str(std::str::from_utf8(&buf).unwrap().lines().next().unwrap())
                .unwrap();
        assert_eq!(first["i"], 0);
        assert!(first["src"][0]["orig"].is_boolean());
    }
}
