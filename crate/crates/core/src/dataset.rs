//! Multi-task training examples: edit reconstruction from mined candidates and
//! masked translation, with MT upweighting and a pair-level dev split.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{BitextPair, Corpus, Format};
use crate::error::{Error, Result};
use crate::mine::PairCandidates;
use crate::tokenize::{is_lang_id, TokenId, Tokenizer, LANG_E, LANG_F, MASK};

/// Subword budget per sequence; longer examples are dropped at build time.
pub const DEFAULT_MAX_LEN: usize = 128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Edit,
    Mt,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingExample {
    /// Index of the source pair in the corpus the example was built from.
    pub pair: usize,
    pub task: Task,
    pub in_f: Vec<TokenId>,
    pub in_e: Vec<TokenId>,
    /// Language id followed by the sentence body; EOS is appended by the model.
    pub target: Vec<TokenId>,
    pub weight: u32,
}

impl TrainingExample {
    /// Encoder length including the separator.
    pub fn source_len(&self) -> usize {
        self.in_f.len() + 1 + self.in_e.len()
    }

    /// Decoder length including EOS.
    pub fn target_len(&self) -> usize {
        self.target.len() + 1
    }

    /// Checks mask placement, the leading language id and id ranges.
    pub fn validate(&self, vocab_len: usize) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("example {}: {m}", self.pair)));
        let is_mask = |s: &[TokenId]| s == [MASK];
        if self.in_f.is_empty() || self.in_e.is_empty() {
            return bad("empty input segment");
        }
        match self.task {
            Task::Edit if is_mask(&self.in_f) || is_mask(&self.in_e) => {
                return bad("edit example with a masked input")
            }
            Task::Mt if is_mask(&self.in_f) == is_mask(&self.in_e) => {
                return bad("translation example needs exactly one masked side")
            }
            _ => {}
        }
        match self.target.first() {
            Some(&id) if is_lang_id(id) => {}
            _ => return bad("target does not start with a language id"),
        }
        if self.task == Task::Mt {
            let expected = if is_mask(&self.in_e) { LANG_E } else { LANG_F };
            if self.target[0] != expected {
                return bad("translation target is on the unmasked side");
            }
        }
        if self.weight == 0 {
            return bad("zero weight");
        }
        let ids = self.in_f.iter().chain(&self.in_e).chain(&self.target);
        if ids.into_iter().any(|&id| id as usize >= vocab_len) {
            return bad("token id outside the vocabulary");
        }
        Ok(())
    }
}

fn with_lang(lang: TokenId, body: Vec<TokenId>) -> Vec<TokenId> {
    let mut t = Vec::with_capacity(body.len() + 1);
    t.push(lang);
    t.extend(body);
    t
}

/// Edit-reconstruction examples for one pair: `(x_f, x_e') -> <e> x_e` for each
/// target-side candidate and `(x_f', x_e) -> <f> x_f` for each source-side one.
pub fn build_edit_examples(
    pair_index: usize,
    pair: &BitextPair,
    cands: &PairCandidates,
    tok: &Tokenizer,
) -> Vec<TrainingExample> {
    let x_f = tok.encode(pair.src.text());
    let x_e = tok.encode(pair.tgt.text());
    let mut out = Vec::with_capacity(cands.src.len() + cands.tgt.len());
    for c in &cands.tgt {
        out.push(TrainingExample {
            pair: pair_index,
            task: Task::Edit,
            in_f: x_f.clone(),
            in_e: tok.encode(c.sentence.text()),
            target: with_lang(LANG_E, x_e.clone()),
            weight: 1,
        });
    }
    for c in &cands.src {
        out.push(TrainingExample {
            pair: pair_index,
            task: Task::Edit,
            in_f: tok.encode(c.sentence.text()),
            in_e: x_e.clone(),
            target: with_lang(LANG_F, x_f.clone()),
            weight: 1,
        });
    }
    out
}

/// Which masked-translation directions to emit per pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Directions {
    Both,
    FToE,
    EToF,
}

impl FromStr for Directions {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(Directions::Both),
            "f2e" | "f-to-e" => Ok(Directions::FToE),
            "e2f" | "e-to-f" => Ok(Directions::EToF),
            _ => Err(Error::InvalidArgument(format!("unknown direction {s:?}"))),
        }
    }
}

/// Masked-translation examples `(x_f, <mask>) -> <e> x_e` and `(<mask>, x_e) -> <f> x_f`.
pub fn build_mt_examples(pair_index: usize, pair: &BitextPair, tok: &Tokenizer) -> Vec<TrainingExample> {
    build_mt_directions(pair_index, pair, tok, Directions::Both)
}

pub fn build_mt_directions(
    pair_index: usize,
    pair: &BitextPair,
    tok: &Tokenizer,
    dirs: Directions,
) -> Vec<TrainingExample> {
    let x_f = tok.encode(pair.src.text());
    let x_e = tok.encode(pair.tgt.text());
    let mut out = Vec::with_capacity(2);
    if dirs != Directions::EToF {
        out.push(TrainingExample {
            pair: pair_index,
            task: Task::Mt,
            in_f: x_f.clone(),
            in_e: vec![MASK],
            target: with_lang(LANG_E, x_e.clone()),
            weight: 1,
        });
    }
    if dirs != Directions::FToE {
        out.push(TrainingExample {
            pair: pair_index,
            task: Task::Mt,
            in_f: vec![MASK],
            in_e: x_e,
            target: with_lang(LANG_F, x_f),
            weight: 1,
        });
    }
    out
}

/// Sets every MT weight to `round(edit_count / |mt|)`, at least 1, so both
/// losses see comparable mass.
pub fn upweight_mt(edit_count: usize, mt_examples: &mut [TrainingExample]) {
    if mt_examples.is_empty() {
        return;
    }
    let w = ((edit_count as f64 / mt_examples.len() as f64).round() as u32).max(1);
    for ex in mt_examples {
        ex.weight = w;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub edit: bool,
    pub mt: Directions,
    pub include_mt: bool,
    pub upweight: bool,
    pub max_len: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            edit: true,
            mt: Directions::Both,
            include_mt: true,
            upweight: true,
            max_len: DEFAULT_MAX_LEN,
        }
    }
}

impl BuildOptions {
    /// Translation-only data for a plain NMT system.
    pub fn mt_only(dirs: Directions) -> Self {
        BuildOptions {
            edit: false,
            mt: dirs,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildStats {
    pub pairs: usize,
    pub edit_examples: usize,
    pub mt_examples: usize,
    pub mt_weight: u32,
    pub dropped_too_long: usize,
}

/// Builds the example list for a corpus in pair order: for each pair its edit
/// examples, then its translation examples.
pub fn build_examples(
    c: &Corpus,
    cands: Option<&[PairCandidates]>,
    tok: &Tokenizer,
    opts: &BuildOptions,
) -> Result<(Vec<TrainingExample>, BuildStats)> {
    if opts.edit {
        match cands {
            Some(cs) if cs.len() == c.len() => {}
            Some(cs) => return Err(Error::LengthMismatch(cs.len(), c.len())),
            None => {
                return Err(Error::InvalidArgument(
                    "edit examples need mined candidates".into(),
                ))
            }
        }
    }
    let mut stats = BuildStats {
        pairs: c.len(),
        ..Default::default()
    };
    let fits = |ex: &TrainingExample| {
        ex.source_len() <= opts.max_len && ex.target_len() <= opts.max_len
    };
    let mut out = Vec::new();
    for (i, pair) in c.pairs().iter().enumerate() {
        let mut exs = Vec::new();
        if opts.edit {
            exs.extend(build_edit_examples(i, pair, &cands.unwrap()[i], tok));
        }
        if opts.include_mt {
            exs.extend(build_mt_directions(i, pair, tok, opts.mt));
        }
        for ex in exs {
            if !fits(&ex) {
                stats.dropped_too_long += 1;
                continue;
            }
            match ex.task {
                Task::Edit => stats.edit_examples += 1,
                Task::Mt => stats.mt_examples += 1,
            }
            out.push(ex);
        }
    }
    stats.mt_weight = 1;
    if opts.upweight && stats.edit_examples > 0 {
        let mut mt: Vec<&mut TrainingExample> =
            out.iter_mut().filter(|e| e.task == Task::Mt).collect();
        if !mt.is_empty() {
            let w = ((stats.edit_examples as f64 / mt.len() as f64).round() as u32).max(1);
            for ex in mt.iter_mut() {
                ex.weight = w;
            }
            stats.mt_weight = w;
        }
    }
    Ok((out, stats))
}

/// Sum of weights over examples of one task.
pub fn weighted_mass(examples: &[TrainingExample], task: Task) -> u64 {
    examples
        .iter()
        .filter(|e| e.task == task)
        .map(|e| e.weight as u64)
        .sum()
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<TrainingExample>,
    pub dev: Vec<TrainingExample>,
}

impl DatasetSplit {
    /// Keeps only translation examples in dev.
    pub fn dev_clean_only(mut self) -> Self {
        self.dev.retain(|e| e.task == Task::Mt);
        self
    }
}

/// Moves every example of `dev_pairs` randomly chosen source pairs to dev.
pub fn make_split(examples: Vec<TrainingExample>, dev_pairs: usize, seed: u64) -> Result<DatasetSplit> {
    let pairs: Vec<usize> = examples
        .iter()
        .map(|e| e.pair)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if dev_pairs == 0 {
        return Ok(DatasetSplit {
            train: examples,
            dev: Vec::new(),
        });
    }
    if dev_pairs >= pairs.len() {
        return Err(Error::TooFewPairs {
            dev: dev_pairs,
            total: pairs.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen: BTreeSet<usize> = index::sample(&mut rng, pairs.len(), dev_pairs)
        .into_iter()
        .map(|i| pairs[i])
        .collect();
    let (dev, train) = examples.into_iter().partition(|e| chosen.contains(&e.pair));
    Ok(DatasetSplit { train, dev })
}

#[derive(Serialize, Deserialize)]
struct ExampleJson {
    task: Task,
    in_f: Vec<TokenId>,
    in_e: Vec<TokenId>,
    tgt: Vec<TokenId>,
    w: u32,
    pair: usize,
}

const BIN_MAGIC: &[u8; 4] = b"BTXD";
const BIN_VERSION: u32 = 1;

/// Writes examples as JSONL (`{"task","in_f","in_e","tgt","w","pair"}`) or as
/// length-prefixed binary records.
pub fn write_examples<W: Write>(examples: &[TrainingExample], format: Format, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let io = |e| Error::io("<dataset>", e);
    match format {
        Format::Jsonl => {
            for ex in examples {
                let row = ExampleJson {
                    task: ex.task,
                    in_f: ex.in_f.clone(),
                    in_e: ex.in_e.clone(),
                    tgt: ex.target.clone(),
                    w: ex.weight,
                    pair: ex.pair,
                };
                serde_json::to_writer(&mut out, &row)?;
                out.write_all(b"\n").map_err(io)?;
            }
        }
        Format::Tsv => {
            out.write_all(BIN_MAGIC).map_err(io)?;
            out.write_all(&BIN_VERSION.to_le_bytes()).map_err(io)?;
            for ex in examples {
                let mut rec = Vec::new();
                rec.extend_from_slice(&(ex.pair as u64).to_le_bytes());
                rec.push(match ex.task {
                    Task::Edit => 0,
                    Task::Mt => 1,
                });
                rec.extend_from_slice(&ex.weight.to_le_bytes());
                for seq in [&ex.in_f, &ex.in_e, &ex.target] {
                    rec.extend_from_slice(&(seq.len() as u32).to_le_bytes());
                    for id in seq.iter() {
                        rec.extend_from_slice(&id.to_le_bytes());
                    }
                }
                out.write_all(&(rec.len() as u32).to_le_bytes()).map_err(io)?;
                out.write_all(&rec).map_err(io)?;
            }
        }
    }
    out.flush().map_err(io)
}

fn bin_err(detail: &str) -> Error {
    Error::Format {
        what: "binary dataset",
        detail: detail.to_string(),
    }
}

fn read_binary(bytes: &[u8]) -> Result<Vec<TrainingExample>> {
    if bytes.len() < 8 || &bytes[..4] != BIN_MAGIC {
        return Err(bin_err("bad magic"));
    }
    if u32::from_le_bytes(bytes[4..8].try_into().unwrap()) != BIN_VERSION {
        return Err(bin_err("unsupported version"));
    }
    let mut pos = 8;
    let mut take = |n: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + n).ok_or_else(|| bin_err("truncated record"))?;
        pos += n;
        Ok(s)
    };
    let mut out = Vec::new();
    loop {
        let len_bytes = match take(4) {
            Ok(b) => b,
            Err(_) => break,
        };
        let len = u32::from_le_bytes(len_bytes.try_into().unwrap()) as usize;
        let rec = take(len)?;
        let mut r = 0usize;
        let mut field = |n: usize| -> Result<&[u8]> {
            let s = rec.get(r..r + n).ok_or_else(|| bin_err("short record"))?;
            r += n;
            Ok(s)
        };
        let pair = u64::from_le_bytes(field(8)?.try_into().unwrap()) as usize;
        let task = match field(1)?[0] {
            0 => Task::Edit,
            1 => Task::Mt,
            _ => return Err(bin_err("unknown task tag")),
        };
        let weight = u32::from_le_bytes(field(4)?.try_into().unwrap());
        let mut seqs: Vec<Vec<TokenId>> = Vec::with_capacity(3);
        for _ in 0..3 {
            let n = u32::from_le_bytes(field(4)?.try_into().unwrap()) as usize;
            let raw = field(4 * n)?;
            seqs.push(
                raw.chunks_exact(4)
                    .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
                    .collect(),
            );
        }
        let target = seqs.pop().unwrap();
        let in_e = seqs.pop().unwrap();
        let in_f = seqs.pop().unwrap();
        out.push(TrainingExample {
            pair,
            task,
            in_f,
            in_e,
            target,
            weight,
        });
    }
    Ok(out)
}

/// Reads a dataset file, detecting the binary form by its magic bytes.
pub fn read_examples<R: Read>(mut input: R) -> Result<Vec<TrainingExample>> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<dataset>", e))?;
    if bytes.starts_with(BIN_MAGIC) {
        return read_binary(&bytes);
    }
    let mut out = Vec::new();
    for line in BufReader::new(&bytes[..]).lines() {
        let line = line.map_err(|e| Error::io("<dataset>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ExampleJson = serde_json::from_str(&line)?;
        out.push(TrainingExample {
            pair: row.pair,
            task: row.task,
            in_f: row.in_f,
            in_e: row.in_e,
            target: row.tgt,
            weight: row.w,
        });
    }
    Ok(out)
}

pub fn save_examples(examples: &[TrainingExample], path: &Path, format: Format) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_examples(examples, format, f)
}

pub fn load_examples(path: &Path) -> Result<Vec<TrainingExample>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_examples(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{gen_synthetic, NoiseSpec, Side};
    use crate::mine::{mine_candidates, EmbeddingIndex, HashEmbedder, MinedCandidate};

    fn setup(n: usize, k: usize) -> (Corpus, Vec<PairCandidates>, Tokenizer) {
        let (c, _) = gen_synthetic(n, 40, (2, 6), &NoiseSpec::zero(0), 7).unwrap();
        let e = HashEmbedder::toy(128);
        let is = EmbeddingIndex::from_corpus_side(&[&c], Side::Src, &e).unwrap();
        let it = EmbeddingIndex::from_corpus_side(&[&c], Side::Tgt, &e).unwrap();
        let cands = mine_candidates(&c, &is, &it, k, &e).unwrap();
        let tok = Tokenizer::learn(c.side_texts(Side::Src).chain(c.side_texts(Side::Tgt)), 200)
            .unwrap();
        (c, cands, tok)
    }

    #[test]
    fn original_candidate_gives_copy_supervision() {
        let (c, _, tok) = setup(3, 1);
        let p = &c.pairs()[0];
        let own = PairCandidates {
            src: vec![MinedCandidate {
                sentence: p.src.clone(),
                cosine: 1.0,
                is_original: true,
            }],
            tgt: vec![MinedCandidate {
                sentence: p.tgt.clone(),
                cosine: 1.0,
                is_original: true,
            }],
        };
        let exs = build_edit_examples(0, p, &own, &tok);
        assert_eq!(exs.len(), 2);
        assert_eq!(&exs[0].target[1..], &exs[0].in_e[..]);
        assert_eq!(exs[0].target[0], LANG_E);
        assert_eq!(&exs[1].target[1..], &exs[1].in_f[..]);
        assert_eq!(exs[1].target[0], LANG_F);
    }

    #[test]
    fn four_candidates_per_side_give_eight_edit_examples() {
        let (c, cands, tok) = setup(20, 4);
        for (i, p) in c.pairs().iter().enumerate() {
            let exs = build_edit_examples(i, p, &cands[i], &tok);
            assert_eq!(exs.len(), 8);
            for ex in &exs {
                ex.validate(tok.vocab.len()).unwrap();
                let side = if ex.target[0] == LANG_E { &p.tgt } else { &p.src };
                assert_eq!(tok.decode(&ex.target[1..]), side.text());
            }
        }
    }

    #[test]
    fn one_token_substitution_shows_up_in_the_target() {
        let (c, _, tok) = setup(5, 1);
        let p = &c.pairs()[0];
        let mut words: Vec<&str> = p.tgt.text().split(' ').collect();
        let replaced = if words[0] == "e1" { "e2" } else { "e1" };
        words[0] = replaced;
        let variant = crate::corpus::Sentence::new(&words.join(" "), p.tgt.lang().clone()).unwrap();
        let cands = PairCandidates {
            src: vec![],
            tgt: vec![MinedCandidate {
                sentence: variant,
                cosine: 0.9,
                is_original: false,
            }],
        };
        let ex = &build_edit_examples(0, p, &cands, &tok)[0];
        let body = &ex.target[1..];
        assert_eq!(body.len(), ex.in_e.len());
        let diffs = body.iter().zip(&ex.in_e).filter(|(a, b)| a != b).count();
        assert_eq!(diffs, 1);
    }

    #[test]
    fn mt_examples_mask_one_side() {
        let (c, _, tok) = setup(2, 1);
        let exs = build_mt_examples(0, &c.pairs()[0], &tok);
        assert_eq!(exs.len(), 2);
        assert_eq!(exs[0].in_e, vec![MASK]);
        assert_eq!(exs[0].target[0], LANG_E);
        assert_eq!(exs[1].in_f, vec![MASK]);
        assert_eq!(exs[1].target[0], LANG_F);
        for ex in &exs {
            ex.validate(tok.vocab.len()).unwrap();
        }
    }

    #[test]
    fn upweighting_arithmetic() {
        let (c, _, tok) = setup(2, 1);
        let mut mt = build_mt_examples(0, &c.pairs()[0], &tok);
        upweight_mt(8, &mut mt);
        assert!(mt.iter().all(|e| e.weight == 4));
        upweight_mt(2, &mut mt);
        assert!(mt.iter().all(|e| e.weight == 1));
        upweight_mt(0, &mut mt);
        assert!(mt.iter().all(|e| e.weight == 1));
    }

    #[test]
    fn validation_rejects_broken_examples() {
        let (c, _, tok) = setup(2, 1);
        let v = tok.vocab.len();
        let mut ex = build_mt_examples(0, &c.pairs()[0], &tok).remove(0);
        ex.validate(v).unwrap();
        let mut e2 = ex.clone();
        e2.task = Task::Edit;
        assert!(e2.validate(v).is_err());
        let mut e3 = ex.clone();
        e3.target[0] = 9;
        assert!(e3.validate(v).is_err());
        let mut e4 = ex.clone();
        e4.in_f = vec![MASK];
        assert!(e4.validate(v).is_err());
        ex.target[0] = LANG_F;
        assert!(ex.validate(v).is_err());
    }

    #[test]
    fn split_by_pair() {
        let (c, cands, tok) = setup(100, 4);
        let (exs, stats) = build_examples(&c, Some(&cands), &tok, &BuildOptions::default()).unwrap();
        assert_eq!(stats.mt_weight, 4);
        let none = make_split(exs.clone(), 0, 1).unwrap();
        assert!(none.dev.is_empty());
        let a = make_split(exs.clone(), 10, 42).unwrap();
        let b = make_split(exs.clone(), 10, 42).unwrap();
        assert_eq!(a, b);
        // 10 pairs x (8 edit + 2 translation) examples
        assert_eq!(a.dev.len(), 10 * (8 + 2));
        let dev_pairs: BTreeSet<usize> = a.dev.iter().map(|e| e.pair).collect();
        assert_eq!(dev_pairs.len(), 10);
        assert!(a.train.iter().all(|e| !dev_pairs.contains(&e.pair)));
        assert!(matches!(
            make_split(exs, 100, 1),
            Err(Error::TooFewPairs { dev: 100, total: 100 })
        ));
        let clean = a.dev_clean_only();
        assert!(clean.dev.iter().all(|e| e.task == Task::Mt));
    }

    #[test]
    fn long_examples_are_dropped_and_counted() {
        let (c, cands, tok) = setup(10, 2);
        let opts = BuildOptions {
            max_len: 8,
            ..BuildOptions::default()
        };
        let (exs, stats) = build_examples(&c, Some(&cands), &tok, &opts).unwrap();
        assert!(stats.dropped_too_long > 0);
        assert!(exs.iter().all(|e| e.source_len() <= 8 && e.target_len() <= 8));
    }

    #[test]
    fn dataset_files_round_trip() {
        let (c, cands, tok) = setup(6, 2);
        let (exs, _) = build_examples(&c, Some(&cands), &tok, &BuildOptions::default()).unwrap();
        for fmt in [Format::Jsonl, Format::Tsv] {
            let mut buf = Vec::new();
            write_examples(&exs, fmt, &mut buf).unwrap();
            assert_eq!(read_examples(&buf[..]).unwrap(), exs);
        }
        let mut buf = Vec::new();
        write_examples(&exs[..1], Format::Jsonl, &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        for key in ["task", "in_f", "in_e", "tgt", "w"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }
}
