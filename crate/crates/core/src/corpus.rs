//! Bitext data model, TSV/JSONL ingestion, pool splitting, downsampling and the
//! synthetic toy language used for desk-scale experiments.
//!
//! The toy language pair maps a source sentence `f3 f17 f0` to the target
//! `e0 e17 e3`: every token is translated through the lexicon `fi -> ei` and the
//! sequence is reversed. A correct translation is therefore a deterministic
//! function of the source, which makes corpus quality machine-checkable.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

/// Short ASCII language tag such as `f`, `e` or `en`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Lang(String);

impl Lang {
    pub fn new(tag: impl Into<String>) -> Result<Self> {
        let tag = tag.into();
        let ok = !tag.is_empty()
            && tag.len() <= 16
            && tag
                .bytes()
                .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_');
        if ok {
            Ok(Lang(tag))
        } else {
            Err(Error::InvalidArgument(format!("bad language tag {tag:?}")))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for Lang {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Lang::new(s)
    }
}

/// NFC-normalized sentence text tagged with its language.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Sentence {
    text: String,
    lang: Lang,
}

impl Sentence {
    pub fn new(text: &str, lang: Lang) -> Result<Self> {
        if text.contains(['\t', '\r', '\n']) {
            return Err(Error::InvalidSentence(format!(
                "tab or line break in {text:?}"
            )));
        }
        if text.trim().is_empty() {
            return Err(Error::InvalidSentence("empty text".into()));
        }
        Ok(Sentence {
            text: text.nfc().collect(),
            lang,
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn lang(&self) -> &Lang {
        &self.lang
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BitextPair {
    pub src: Sentence,
    pub tgt: Sentence,
    pub score: Option<f64>,
}

impl BitextPair {
    pub fn new(src: Sentence, tgt: Sentence, score: Option<f64>) -> Result<Self> {
        if src.lang == tgt.lang {
            return Err(Error::InvalidPair(format!(
                "both sides are tagged {}",
                src.lang
            )));
        }
        if let Some(s) = score {
            if !s.is_finite() {
                return Err(Error::InvalidPair(format!("non-finite score {s}")));
            }
        }
        Ok(BitextPair { src, tgt, score })
    }

    pub fn side(&self, side: Side) -> &Sentence {
        match side {
            Side::Src => &self.src,
            Side::Tgt => &self.tgt,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Src,
    Tgt,
}

/// An ordered list of pairs over a fixed language pair.
#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pairs: Vec<BitextPair>,
    src_lang: Lang,
    tgt_lang: Lang,
}

impl Corpus {
    pub fn new(src_lang: Lang, tgt_lang: Lang) -> Result<Self> {
        if src_lang == tgt_lang {
            return Err(Error::InvalidArgument(format!(
                "source and target language are both {src_lang}"
            )));
        }
        Ok(Corpus {
            pairs: Vec::new(),
            src_lang,
            tgt_lang,
        })
    }

    pub fn from_pairs(src_lang: Lang, tgt_lang: Lang, pairs: Vec<BitextPair>) -> Result<Self> {
        let mut c = Corpus::new(src_lang, tgt_lang)?;
        for p in pairs {
            c.push(p)?;
        }
        Ok(c)
    }

    /// Builds a pair from raw strings in this corpus's languages and appends it.
    pub fn push_text(&mut self, src: &str, tgt: &str, score: Option<f64>) -> Result<()> {
        let pair = BitextPair::new(
            Sentence::new(src, self.src_lang.clone())?,
            Sentence::new(tgt, self.tgt_lang.clone())?,
            score,
        )?;
        self.pairs.push(pair);
        Ok(())
    }

    pub fn push(&mut self, pair: BitextPair) -> Result<()> {
        if pair.src.lang != self.src_lang || pair.tgt.lang != self.tgt_lang {
            return Err(Error::InvalidPair(format!(
                "pair is {}-{}, corpus is {}-{}",
                pair.src.lang, pair.tgt.lang, self.src_lang, self.tgt_lang
            )));
        }
        self.pairs.push(pair);
        Ok(())
    }

    pub fn pairs(&self) -> &[BitextPair] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn src_lang(&self) -> &Lang {
        &self.src_lang
    }

    pub fn tgt_lang(&self) -> &Lang {
        &self.tgt_lang
    }

    pub fn side_texts(&self, side: Side) -> impl Iterator<Item = &str> + Clone + '_ {
        self.pairs.iter().map(move |p| p.side(side).text())
    }

    /// Empty corpus over the same languages.
    pub fn empty_like(&self) -> Corpus {
        Corpus {
            pairs: Vec::new(),
            src_lang: self.src_lang.clone(),
            tgt_lang: self.tgt_lang.clone(),
        }
    }

    fn with_pairs(&self, pairs: Vec<BitextPair>) -> Corpus {
        Corpus {
            pairs,
            src_lang: self.src_lang.clone(),
            tgt_lang: self.tgt_lang.clone(),
        }
    }

    /// Concatenation, preserving order (`self` first).
    pub fn concat(&self, other: &Corpus) -> Result<Corpus> {
        if self.src_lang != other.src_lang || self.tgt_lang != other.tgt_lang {
            return Err(Error::InvalidArgument("language pairs differ".into()));
        }
        let mut pairs = self.pairs.clone();
        pairs.extend(other.pairs.iter().cloned());
        Ok(self.with_pairs(pairs))
    }

    /// Sub-corpus of the given pair indices, in the given order.
    pub fn select(&self, indices: &[usize]) -> Corpus {
        self.with_pairs(indices.iter().map(|&i| self.pairs[i].clone()).collect())
    }

    /// Copy with every alignment score removed.
    pub fn without_scores(&self) -> Corpus {
        self.with_pairs(
            self.pairs
                .iter()
                .map(|p| BitextPair {
                    score: None,
                    ..p.clone()
                })
                .collect(),
        )
    }

    /// Copy with scores replaced; `scores.len()` must equal `self.len()`.
    pub fn with_scores(&self, scores: &[f64]) -> Result<Corpus> {
        if scores.len() != self.len() {
            return Err(Error::LengthMismatch(scores.len(), self.len()));
        }
        self.pairs
            .iter()
            .zip(scores)
            .map(|(p, &s)| BitextPair::new(p.src.clone(), p.tgt.clone(), Some(s)))
            .collect::<Result<Vec<_>>>()
            .map(|pairs| self.with_pairs(pairs))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Tsv,
    Jsonl,
}

impl FromStr for Format {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tsv" => Ok(Format::Tsv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(Error::InvalidArgument(format!("unknown format {other:?}"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Tsv => "tsv",
            Format::Jsonl => "jsonl",
        })
    }
}

#[derive(Serialize, Deserialize)]
struct JsonRow {
    src: String,
    tgt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

pub fn load_corpus(path: &Path, format: Format, src_lang: &Lang, tgt_lang: &Lang) -> Result<Corpus> {
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    parse_corpus(&bytes, format, src_lang, tgt_lang)
}

/// Parses corpus bytes; line numbers in errors are 1-based.
pub fn parse_corpus(bytes: &[u8], format: Format, src_lang: &Lang, tgt_lang: &Lang) -> Result<Corpus> {
    let mut corpus = Corpus::new(src_lang.clone(), tgt_lang.clone())?;
    for (i, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line_no = i + 1;
        let line = std::str::from_utf8(raw).map_err(|_| Error::EncodingError(line_no))?;
        let line = line.strip_suffix('\r').unwrap_or(line);
        if line.trim().is_empty() {
            continue;
        }
        let (src, tgt, score) = match format {
            Format::Tsv => {
                let fields: Vec<&str> = line.split('\t').collect();
                match fields.as_slice() {
                    [s, t] => (s.to_string(), t.to_string(), None),
                    [s, t, sc] => {
                        let score = sc
                            .trim()
                            .parse::<f64>()
                            .ok()
                            .filter(|v| v.is_finite())
                            .ok_or(Error::MalformedRow(line_no))?;
                        (s.to_string(), t.to_string(), Some(score))
                    }
                    _ => return Err(Error::MalformedRow(line_no)),
                }
            }
            Format::Jsonl => {
                let row: JsonRow =
                    serde_json::from_str(line).map_err(|_| Error::MalformedRow(line_no))?;
                (row.src, row.tgt, row.score)
            }
        };
        corpus
            .push_text(&src, &tgt, score)
            .map_err(|_| Error::MalformedRow(line_no))?;
    }
    Ok(corpus)
}

/// Serializes a corpus. Scores use the shortest decimal form that parses back
/// to the identical `f64`.
pub fn write_corpus<W: Write>(c: &Corpus, format: Format, mut out: W) -> std::io::Result<()> {
    for p in &c.pairs {
        match format {
            Format::Tsv => match p.score {
                Some(s) => writeln!(out, "{}\t{}\t{}", p.src.text, p.tgt.text, s)?,
                None => writeln!(out, "{}\t{}", p.src.text, p.tgt.text)?,
            },
            Format::Jsonl => {
                let row = JsonRow {
                    src: p.src.text.clone(),
                    tgt: p.tgt.text.clone(),
                    score: p.score,
                };
                serde_json::to_writer(&mut out, &row)?;
                out.write_all(b"\n")?;
            }
        }
    }
    out.flush()
}

pub fn save_corpus(c: &Corpus, path: &Path, format: Format) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus(c, format, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Splits a scored corpus into Pool A (`score >= high`) and Pool B
/// (`low < score < high`). Pairs scoring `<= low` are dropped.
pub fn split_pools(c: &Corpus, low: f64, high: f64) -> Result<(Corpus, Corpus)> {
    if low.is_nan() || high.is_nan() || low >= high {
        return Err(Error::InvalidArgument(format!(
            "need low < high, got {low} and {high}"
        )));
    }
    let mut pool_a = Vec::new();
    let mut pool_b = Vec::new();
    for (i, p) in c.pairs.iter().enumerate() {
        let s = p.score.ok_or(Error::MissingScore(i))?;
        if s >= high {
            pool_a.push(p.clone());
        } else if s > low {
            pool_b.push(p.clone());
        }
    }
    Ok((c.with_pairs(pool_a), c.with_pairs(pool_b)))
}

/// Uniform sample of `n` pairs without replacement, original order kept.
pub fn downsample(c: &Corpus, n: usize, seed: u64) -> Result<Corpus> {
    let idx = downsample_indices(c.len(), n, seed)?;
    Ok(c.select(&idx))
}

/// The sorted pair indices [`downsample`] keeps.
pub fn downsample_indices(len: usize, n: usize, seed: u64) -> Result<Vec<usize>> {
    if n > len {
        return Err(Error::SampleTooLarge {
            requested: n,
            available: len,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = index::sample(&mut rng, len, n).into_vec();
    idx.sort_unstable();
    Ok(idx)
}

/// Corruption model for the target side of a corpus.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub p_drop: f64,
    pub p_swap: f64,
    pub p_replace: f64,
    pub p_misalign: f64,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::zero(0)
    }
}

impl NoiseSpec {
    pub fn zero(seed: u64) -> Self {
        NoiseSpec {
            p_drop: 0.0,
            p_swap: 0.0,
            p_replace: 0.0,
            p_misalign: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_drop", self.p_drop),
            ("p_swap", self.p_swap),
            ("p_replace", self.p_replace),
            ("p_misalign", self.p_misalign),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name}={p} not in [0,1]")));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.p_drop == 0.0 && self.p_swap == 0.0 && self.p_replace == 0.0 && self.p_misalign == 0.0
    }
}

pub fn toy_src_word(i: usize) -> String {
    format!("f{i}")
}

pub fn toy_tgt_word(i: usize) -> String {
    format!("e{i}")
}

/// Correct toy-language translation of a source sentence, or `None` when a
/// token is outside the `f<number>` lexicon.
pub fn toy_reference(src: &str) -> Option<String> {
    let mapped: Option<Vec<String>> = src
        .split_whitespace()
        .rev()
        .map(|w| {
            let n = w.strip_prefix('f')?;
            (!n.is_empty() && n.bytes().all(|b| b.is_ascii_digit())).then(|| format!("e{n}"))
        })
        .collect();
    mapped.map(|m| m.join(" "))
}

/// Generates index-aligned clean and noisy corpora over the toy language.
///
/// The clean corpus depends only on `seed`; corruption draws from a stream
/// seeded by `noise.seed`.
pub fn gen_synthetic(
    n_pairs: usize,
    vocab_size: usize,
    len_range: (usize, usize),
    noise: &NoiseSpec,
    seed: u64,
) -> Result<(Corpus, Corpus)> {
    let (min_len, max_len) = len_range;
    if vocab_size < 2 {
        return Err(Error::InvalidArgument("vocab_size must be >= 2".into()));
    }
    if min_len < 1 || min_len > max_len {
        return Err(Error::InvalidArgument(format!(
            "bad length range ({min_len}, {max_len})"
        )));
    }
    noise.validate()?;
    let mut clean = Corpus::new(Lang("f".into()), Lang("e".into()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_pairs {
        let len = rng.random_range(min_len..=max_len);
        let ids: Vec<usize> = (0..len).map(|_| rng.random_range(0..vocab_size)).collect();
        let src: Vec<String> = ids.iter().map(|&i| toy_src_word(i)).collect();
        let tgt: Vec<String> = ids.iter().rev().map(|&i| toy_tgt_word(i)).collect();
        clean.push_text(&src.join(" "), &tgt.join(" "), None)?;
    }
    let replacements: Vec<String> = (0..vocab_size).map(toy_tgt_word).collect();
    let noisy = apply_noise(&clean, noise, &replacements)?;
    Ok((clean, noisy))
}

/// Corrupts the target side of every pair with token drops, replacements and
/// adjacent swaps, then misaligns a `p_misalign` fraction of pairs by rotating
/// their targets. Replacement tokens are drawn from `replacements` and always
/// differ from the token they replace.
pub fn apply_noise(c: &Corpus, noise: &NoiseSpec, replacements: &[String]) -> Result<Corpus> {
    noise.validate()?;
    if noise.p_replace > 0.0 && replacements.len() < 2 {
        return Err(Error::InvalidArgument(
            "replacement noise needs at least two candidate tokens".into(),
        ));
    }
    if noise.is_zero() {
        return Ok(c.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed ^ 0x6e6f_6973_6521);
    let mut targets: Vec<String> = Vec::with_capacity(c.len());
    for p in &c.pairs {
        let orig: Vec<&str> = p.tgt.text.split_whitespace().collect();
        let mut out: Vec<String> = Vec::with_capacity(orig.len());
        for &tok in &orig {
            if rng.random_bool(noise.p_drop) {
                continue;
            }
            if rng.random_bool(noise.p_replace) {
                loop {
                    let cand = &replacements[rng.random_range(0..replacements.len())];
                    if cand != tok {
                        out.push(cand.clone());
                        break;
                    }
                }
            } else {
                out.push(tok.to_string());
            }
        }
        let mut i = 0;
        while i + 1 < out.len() {
            if rng.random_bool(noise.p_swap) {
                out.swap(i, i + 1);
                i += 2;
            } else {
                i += 1;
            }
        }
        if out.is_empty() {
            // a sentence cannot be empty; keep the first original token
            out.push(orig[0].to_string());
        }
        targets.push(out.join(" "));
    }

    let n_mis = (noise.p_misalign * c.len() as f64).round() as usize;
    if n_mis >= 2 {
        let mut chosen = index::sample(&mut rng, c.len(), n_mis).into_vec();
        chosen.sort_unstable();
        let first = targets[chosen[0]].clone();
        for w in 0..chosen.len() - 1 {
            targets[chosen[w]] = targets[chosen[w + 1]].clone();
        }
        targets[*chosen.last().unwrap()] = first;
    }

    let mut out = c.empty_like();
    for (p, t) in c.pairs.iter().zip(targets) {
        out.push_text(&p.src.text, &t, p.score)?;
    }
    Ok(out)
}
