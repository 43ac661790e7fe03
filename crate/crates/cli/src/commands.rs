//! Subcommands. Each one reads its inputs, writes fixed-name artifacts into
//! the output directory and returns their names relative to it.

use std::fs;
use std::path::{Path, PathBuf};

use bitext_core::corpus::{
    apply_noise, downsample_indices, gen_synthetic, load_corpus, save_corpus, split_pools, toy_tgt_word, Corpus,
    Format, NoiseSpec, Side,
};
use bitext_core::dataset::{
    build_examples, load_examples, make_split, save_examples, BuildOptions, BuildStats, DatasetSplit, Directions,
    TrainingExample,
};
use bitext_core::metrics::{bleu_text, chrf, edited_fraction, type_token_ratio, BleuOptions};
use bitext_core::mine::{margin_scores, mine_candidates, read_candidates, write_candidates, EmbeddingIndex, HashEmbedder};
use bitext_core::model::{
    backtranslate_corpus, load_checkpoint, refine_corpus, save_checkpoint, train, translate, CheckpointMeta,
    EditorModel, ModelConfig, RefineOutput, TrainOutcome,
};
use bitext_core::tokenize::{Tokenizer, BPE_FILE, VOCAB_FILE};
use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult, StageExt};

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";

#[derive(Subcommand, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    /// Generate a clean synthetic corpus and a partly corrupted copy.
    Gen(GenArgs),
    /// Attach margin scores to every pair of a corpus.
    Score(ScoreArgs),
    /// Split a scored corpus into Pool A and Pool B.
    SplitPools(InputArgs),
    /// Retrieve k nearest neighbours for both sides of every pair.
    Mine(MineArgs),
    /// Learn the tokenizer and build editing or translation examples.
    Build(BuildArgs),
    /// Train a model on a built dataset.
    Train(TrainArgs),
    /// Rewrite each pair of a corpus with a trained editor.
    Refine(DecodeArgs),
    /// Regenerate the source side of a corpus from its target side.
    Backtranslate(DecodeArgs),
    /// Score translations of a test corpus with BLEU and chrF.
    Evaluate(EvaluateArgs),
    /// Edit statistics and lexical diversity of an original and a refined corpus.
    Analyze(AnalyzeArgs),
    /// Run the full synthetic comparison and write the results table.
    Experiment(ExperimentArgs),
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenArgs {
    /// Number of pairs; defaults to `synth.pairs`.
    #[arg(long)]
    pub pairs: Option<usize>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputArgs {
    pub input: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreArgs {
    pub input: PathBuf,
    /// Corpora whose sides form the retrieval pools; defaults to the input.
    #[arg(long)]
    pub pool: Vec<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MineArgs {
    /// Pairs to mine candidates for (normally Pool A).
    #[arg(long)]
    pub corpus: PathBuf,
    /// Corpora whose sides form the retrieval pools; defaults to the corpus.
    #[arg(long)]
    pub pool: Vec<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Mined candidates of `corpus`; required unless `--mt-only`.
    #[arg(long)]
    pub candidates: Option<PathBuf>,
    /// Only masked-translation examples (a plain translation system).
    #[arg(long)]
    pub mt_only: bool,
    /// Translation directions: both, f2e or e2f; defaults to `build.directions`.
    #[arg(long)]
    pub directions: Option<String>,
    /// Reuse the tokenizer in this directory instead of learning one.
    #[arg(long)]
    pub tokenizer: Option<PathBuf>,
    /// Extra corpora to learn the tokenizer from.
    #[arg(long)]
    pub learn_from: Vec<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Output directory of `build`.
    #[arg(long)]
    pub data: PathBuf,
    /// Use the `nmt` config section instead of `model`.
    #[arg(long)]
    pub nmt: bool,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeArgs {
    /// Output directory of `train`.
    #[arg(long)]
    pub model: PathBuf,
    pub input: PathBuf,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluateArgs {
    /// Reference corpus; its sources are translated and its targets are the references.
    #[arg(long)]
    pub test: PathBuf,
    /// Output directory of `train`.
    #[arg(long, required_unless_present = "hyps")]
    pub model: Option<PathBuf>,
    /// Precomputed hypotheses, one per line, instead of a model.
    #[arg(long, conflicts_with = "model")]
    pub hyps: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub original: PathBuf,
    #[arg(long)]
    pub refined: PathBuf,
}

#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentArgs {}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Gen(_) => "gen",
            Command::Score(_) => "score",
            Command::SplitPools(_) => "split-pools",
            Command::Mine(_) => "mine",
            Command::Build(_) => "build",
            Command::Train(_) => "train",
            Command::Refine(_) => "refine",
            Command::Backtranslate(_) => "backtranslate",
            Command::Evaluate(_) => "evaluate",
            Command::Analyze(_) => "analyze",
            Command::Experiment(_) => "experiment",
        }
    }

    /// Input paths with the subcommand that normally produces each.
    pub fn inputs_mut(&mut self) -> Vec<(&mut PathBuf, &'static str)> {
        const CORPUS: &str = "gen, split-pools or refine";
        match self {
            Command::Gen(_) | Command::Experiment(_) => vec![],
            Command::Score(a) => std::iter::once((&mut a.input, CORPUS))
                .chain(a.pool.iter_mut().map(|p| (p, CORPUS)))
                .collect(),
            Command::SplitPools(a) => vec![(&mut a.input, "score")],
            Command::Mine(a) => std::iter::once((&mut a.corpus, "split-pools"))
                .chain(a.pool.iter_mut().map(|p| (p, "split-pools")))
                .collect(),
            Command::Build(a) => {
                let mut v = vec![(&mut a.corpus, CORPUS)];
                if let Some(c) = a.candidates.as_mut() {
                    v.push((c, "mine"));
                }
                if let Some(t) = a.tokenizer.as_mut() {
                    v.push((t, "build"));
                }
                v.extend(a.learn_from.iter_mut().map(|p| (p, CORPUS)));
                v
            }
            Command::Train(a) => vec![(&mut a.data, "build")],
            Command::Refine(a) | Command::Backtranslate(a) => vec![(&mut a.model, "train"), (&mut a.input, CORPUS)],
            Command::Evaluate(a) => {
                let mut v = vec![(&mut a.test, CORPUS)];
                if let Some(m) = a.model.as_mut() {
                    v.push((m, "train"));
                }
                if let Some(h) = a.hyps.as_mut() {
                    v.push((h, "evaluate"));
                }
                v
            }
            Command::Analyze(a) => vec![(&mut a.original, CORPUS), (&mut a.refined, "refine")],
        }
    }

    /// Makes input paths absolute and checks that they exist.
    pub fn resolve_inputs(&mut self) -> CliResult<()> {
        for (p, producer) in self.inputs_mut() {
            if !p.exists() {
                return Err(CliError::data(format!(
                    "missing input {} (produced by `bitext {producer}`)",
                    p.display()
                )));
            }
            *p = fs::canonicalize(&*p).map_err(|e| CliError::data(format!("{}: {e}", p.display())))?;
        }
        Ok(())
    }

    pub fn input_paths(&self) -> Vec<PathBuf> {
        self.clone().inputs_mut().into_iter().map(|(p, _)| p.clone()).collect()
    }
}

pub fn execute(cmd: &Command, cfg: &PipelineConfig, out: &Path) -> CliResult<Vec<String>> {
    fs::create_dir_all(out).map_err(|e| CliError::data(format!("{}: {e}", out.display())))?;
    let stage = cmd.name();
    match cmd {
        Command::Gen(a) => cmd_gen(a, cfg, out),
        Command::Score(a) => cmd_score(a, cfg, out),
        Command::SplitPools(a) => cmd_split(a, cfg, out),
        Command::Mine(a) => cmd_mine(a, cfg, out),
        Command::Build(a) => cmd_build(a, cfg, out),
        Command::Train(a) => cmd_train(a, cfg, out),
        Command::Refine(a) => cmd_refine(a, cfg, out, false),
        Command::Backtranslate(a) => cmd_refine(a, cfg, out, true),
        Command::Evaluate(a) => cmd_evaluate(a, cfg, out),
        Command::Analyze(a) => cmd_analyze(a, cfg, out),
        Command::Experiment(_) => return crate::experiment::run(cfg, out).map(|r| r.outputs),
    }
    .stage(stage)
}

// ---- shared helpers ----

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::data(format!("{}: {e}", path.display()))
}

pub fn corpus_format(path: &Path, cfg: &PipelineConfig) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => Format::Jsonl,
        Some("tsv") => Format::Tsv,
        _ => cfg.format,
    }
}

pub fn load(path: &Path, cfg: &PipelineConfig) -> CliResult<Corpus> {
    let (s, t) = cfg.langs();
    Ok(load_corpus(path, corpus_format(path, cfg), &s, &t)?)
}

/// Saves `c` as `<stem>.<format>` under `dir`; returns the file name.
pub fn save(c: &Corpus, dir: &Path, stem: &str, cfg: &PipelineConfig) -> CliResult<String> {
    let name = format!("{stem}.{}", cfg.format);
    save_corpus(c, &dir.join(&name), cfg.format)?;
    Ok(name)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<String> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::data(e.to_string()))?;
    text.push('\n');
    let p = dir.join(name);
    fs::write(&p, text).map_err(|e| io_err(&p, e))?;
    Ok(name.to_string())
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> CliResult<String> {
    let p = dir.join(name);
    fs::write(&p, text).map_err(|e| io_err(&p, e))?;
    Ok(name.to_string())
}

pub fn embedder(cfg: &PipelineConfig) -> HashEmbedder {
    HashEmbedder {
        dim: cfg.mine.embed_dim,
        toy_lexicon: cfg.mine.toy_lexicon,
        ..HashEmbedder::default()
    }
}

/// Corrupts the targets of a `fraction` share of pairs, chosen with the noise
/// seed; the rest are copied unchanged.
pub fn noise_subset(clean: &Corpus, fraction: f64, noise: &NoiseSpec, replacements: &[String]) -> CliResult<Corpus> {
    let n = (fraction * clean.len() as f64).round() as usize;
    let idx = downsample_indices(clean.len(), n, noise.seed)?;
    let noised = apply_noise(&clean.select(&idx), noise, replacements)?;
    let mut out = clean.empty_like();
    let mut next = idx.iter().zip(noised.pairs()).peekable();
    for (i, p) in clean.pairs().iter().enumerate() {
        match next.peek() {
            Some((&j, q)) if j == i => {
                out.push((*q).clone())?;
                next.next();
            }
            _ => out.push(p.clone())?,
        }
    }
    Ok(out)
}

pub fn learn_tokenizer(corpora: &[&Corpus], merges: usize) -> CliResult<Tokenizer> {
    let texts = corpora
        .iter()
        .flat_map(|c| c.side_texts(Side::Src).chain(c.side_texts(Side::Tgt)));
    Ok(Tokenizer::learn(texts, merges)?)
}

/// Trains a fresh model, logging epochs to stderr.
pub fn train_model(
    label: &str,
    config: &ModelConfig,
    vocab_size: usize,
    split: &DatasetSplit,
) -> CliResult<(EditorModel<f32>, TrainOutcome)> {
    let mut model = EditorModel::<f32>::new(config.clone(), vocab_size)?;
    let start = std::time::Instant::now();
    let mut report = |l: &bitext_core::model::EpochLog| {
        eprintln!(
            "[{label}] epoch {:>3} updates {:>6} loss {:.4} dev_ppl {} ({:.0}s)",
            l.epoch,
            l.updates,
            l.train_loss,
            l.dev_ppl.map_or("-".into(), |p| format!("{p:.4}")),
            start.elapsed().as_secs_f64()
        );
    };
    let outcome = train(&mut model, split, &mut report)?;
    Ok((model, outcome))
}

/// Writes a self-contained model directory: checkpoint, log and tokenizer.
pub fn save_model_dir(
    dir: &Path,
    prefix: &str,
    model: &EditorModel<f32>,
    outcome: &TrainOutcome,
    tok: &Tokenizer,
) -> CliResult<Vec<String>> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let meta = CheckpointMeta {
        epoch: outcome.best_epoch,
        dev_ppl: outcome.best_dev_ppl,
    };
    save_checkpoint(model, meta, &dir.join(CHECKPOINT_FILE))?;
    let log: String = outcome
        .log
        .iter()
        .map(|l| serde_json::to_string(l).expect("log serializes") + "\n")
        .collect();
    write_text(dir, TRAIN_LOG_FILE, &log)?;
    tok.save(dir)?;
    Ok([CHECKPOINT_FILE, TRAIN_LOG_FILE, BPE_FILE, VOCAB_FILE]
        .iter()
        .map(|n| format!("{prefix}{n}"))
        .collect())
}

pub fn load_model_dir(dir: &Path) -> CliResult<(EditorModel<f32>, Tokenizer)> {
    let (model, _) = load_checkpoint(&dir.join(CHECKPOINT_FILE))?;
    let tok = Tokenizer::load(dir)?;
    if tok.vocab.len() != model.vocab_size {
        return Err(CliError::data(format!(
            "tokenizer has {} ids but the checkpoint expects {}",
            tok.vocab.len(),
            model.vocab_size
        )));
    }
    Ok((model, tok))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RefineStats {
    pub pairs: usize,
    pub replaced_src: usize,
    pub replaced_tgt: usize,
    pub failures: usize,
    pub truncated: usize,
}

pub fn refine_stats(r: &RefineOutput) -> RefineStats {
    let count = |s: Side| r.replaced.iter().filter(|x| **x == Some(s)).count();
    RefineStats {
        pairs: r.corpus.len(),
        replaced_src: count(Side::Src),
        replaced_tgt: count(Side::Tgt),
        failures: r.failures,
        truncated: r.truncated,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub sentences: usize,
    pub bleu: f64,
    pub chrf: f64,
    pub bleu_detail: bitext_core::metrics::BleuReport,
    pub chrf_detail: bitext_core::metrics::ChrFReport,
}

pub fn evaluate_hyps(hyps: &[String], refs: &[String]) -> CliResult<EvalReport> {
    let b = bleu_text(hyps, refs, BleuOptions::default())?;
    let c = chrf(hyps, refs, 6, 2.0)?;
    Ok(EvalReport {
        sentences: hyps.len(),
        bleu: b.score,
        chrf: c.score,
        bleu_detail: b,
        chrf_detail: c,
    })
}

pub fn translate_corpus(model: &EditorModel<f32>, tok: &Tokenizer, test: &Corpus, beam: usize) -> CliResult<Vec<String>> {
    let sources: Vec<&str> = test.side_texts(Side::Src).collect();
    Ok(translate(model, tok, &sources, beam)?)
}

pub fn targets(c: &Corpus) -> Vec<String> {
    c.side_texts(Side::Tgt).map(str::to_string).collect()
}

fn dataset_file(stem: &str, fmt: Format) -> String {
    match fmt {
        Format::Jsonl => format!("{stem}.jsonl"),
        Format::Tsv => format!("{stem}.bin"),
    }
}

fn find_dataset(dir: &Path, stem: &str) -> Option<PathBuf> {
    ["jsonl", "bin"]
        .iter()
        .map(|e| dir.join(format!("{stem}.{e}")))
        .find(|p| p.exists())
}

// ---- subcommands ----

fn cmd_gen(a: &GenArgs, cfg: &PipelineConfig, out: &Path) -> CliResult<Vec<String>> {
    let s = &cfg.synth;
    let n = a.pairs.unwrap_or(s.pairs);
    let (clean, _) = gen_synthetic(n, s.vocab_size, (s.min_len, s.max_len), &NoiseSpec::zero(0), cfg.seed)?;
    let words: Vec<String> = (0..s.vocab_size).map(toy_tgt_word).collect();
    let noisy = noise_subset(&clean, s.noisy_fraction, &s.noise, &words)?;
    Ok(vec![save(&clean, out, "clean", cfg)?, save(&noisy, out, "noisy", cfg)?])
}

fn cmd_score(a: &ScoreArgs, cfg: &PipelineConfig, out: &Path) -> CliResult<Vec<String>> {
    let c = load(&a.input, cfg)?;
    let pools: Vec<Corpus> = a.pool.iter().map(|p| load(p, cfg)).collect::<CliResult<_>>()?;
    let refs: Vec<&Corpus> = if pools.is_empty() { vec![&c] } else { pools.iter().collect() };
    let emb = embedder(cfg);
    let idx_src = EmbeddingIndex::from_corpus_side(&refs, Side::Src, &emb)?;
    let idx_tgt = EmbeddingIndex::from_corpus_side(&refs, Side::Tgt, &emb)?;
    let scores = margin_scores(&c, &idx_src, &idx_tgt, cfg.mine.k, &emb)?;
    Ok(vec![save(&c.with_scores(&scores)?, out, "scored", cfg)?])
}

fn cmd_split(a: &InputArgs, cfg: &PipelineConfig, out: &Path) -> CliResult<Vec<String>> {
    let c = load(&a.input, cfg)?;
    let (pa, pb) = split_pools(&c, cfg.pools.low, cfg.pools.high)?;
    Ok(vec![save(&pa, out, "a", cfg)?, save(&pb, out, "b", cfg)?])
}

fn cmd_mine(a: &MineArgs, cfg: &PipelineConfig, out: &Path) -> CliResult<Vec<String>> {
    let c = load(&a.corpus, cfg)?;
    let pools: Vec<Corpus> = a.pool.iter().map(|p| load(p, cfg)).collect::<CliResult<_>>()?;
    let refs: Vec<&Corpus> = if pools.is_empty() { vec![&c] } else { pools.iter().collect() };
    let emb = embedder(cfg);
    let idx_src = EmbeddingIndex::from_corpus_side(&refs, Side::Src, &emb)?;
    let idx_tgt = EmbeddingIndex::from_corpus_side(&refs, Side::Tgt, &emb)?;
    let cands = mine_candidates(&c, &idx_src, &idx_tgt, cfg.mine.k, &emb)?;
    let name = "candidates.jsonl";
    let p = out.join(name);
    let f = fs::File::create(&p).map_err(|e| io_err(&p, e))?;
    write_candidates(&cands, f)?;
    Ok(vec![name.into()])
}

/// Builds and splits examples for one corpus.
pub fn build_split(
    c: &Corpus,
    cands: Option<&[bitext_core::mine::PairCandidates]>,
    tok: &Tokenizer,
    opts: &BuildOptions,
    cfg: &PipelineConfig,
) -> CliResult<(DatasetSplit, BuildStats)> {
    let (examples, stats) = build_examples(c, cands, tok, opts)?;
    let mut split = make_split(examples, cfg.build.dev_pairs, cfg.seed)?;
    if cfg.build.dev_clean_only {
        split = split.dev_clean_only();
    }
    Ok((split, stats))
}

fn cmd_build(a: &BuildArgs, cfg: &PipelineConfig, out: &Path) -> CliResult<Vec<String>> {
    let c = load(&a.corpus, cfg)?;
    let dirs: Directions = match &a.directions {
        Some(d) => d.parse().map_err(|e: bitext_core::Error| CliError::config("--directions", e.to_string()))?,
        None => cfg.build.directions,
    };
    let tok = match &a.tokenizer {
        Some(dir) => Tokenizer::load(dir)?,
        None => {
            let extra: Vec<Corpus> = a.learn_from.iter().map(|p| load(p, cfg)).collect::<CliResult<_>>()?;
            let mut all: Vec<&Corpus> = vec![&c];
            all.extend(extra.iter());
            learn_tokenizer(&all, cfg.tokenize.merges)?
        }
    };
    let (s, t) = cfg.langs();
    let cands = match (&a.candidates, a.mt_only) {
        (_, true) => None,
        (Some(p), false) => {
            let f = fs::File::open(p).map_err(|e| io_err(p, e))?;
            Some(read_candidates(f, &s, &t)?)
        }
        (None, false) => {
            return Err(CliError::config(
                "--candidates",
                "editing examples need mined candidates (run `bitext mine`) or pass --mt-only",
            ))
        }
    };
    let opts = BuildOptions {
        edit: !a.mt_only,
        mt: dirs,
        include_mt: cfg.build.include_mt || a.mt_only,
        upweight: cfg.build.upweight,
        max_len: cfg.model.max_len,
    };
    let (split, stats) = build_split(&c, cands.as_deref(), &tok, &opts, cfg)?;
    tok.save(out)?;
    let mut names = vec![BPE_FILE.to_string(), VOCAB_FILE.to_string()];
    let train_name = dataset_file("train", cfg.format);
    save_examples(&split.train, &out.join(&train_name), cfg.format)?;
    names.push(train_name);
    if !split.dev.is_empty() {
        let dev_name = dataset_file("dev", cfg.format);
        save_examples(&split.dev, &out.join(&dev_name), cfg.format)?;
        names.push(dev_name);
    }
    names.push(write_json(out, "build.json", &stats)?);
    Ok(names)
}

fn cmd_train(a: &TrainArgs, cfg: &PipelineConfig, out: &Path) -> CliResult<Vec<String>> {
    let tok = Tokenizer::load(&a.data)?;
    let train_path = find_dataset(&a.data, "train")
        .ok_or_else(|| CliError::data(format!("no train set in {} (run `bitext build`)", a.data.display())))?;
    let load_set = |p: &Path| -> CliResult<Vec<TrainingExample>> {
        let v = load_examples(p)?;
        for e in &v {
            e.validate(tok.vocab.len())?;
        }
        Ok(v)
    };
    let split = DatasetSplit {
        train: load_set(&train_path)?,
        dev: match find_dataset(&a.data, "dev") {
            Some(p) => load_set(&p)?,
            None => Vec::new(),
        },
    };
    let mc = if a.nmt { &cfg.nmt } else { &cfg.model };
    let (model, outcome) = train_model("train", mc, tok.vocab.len(), &split)?;
    save_model_dir(out, "", &model, &outcome, &tok)
}

fn cmd_refine(a: &DecodeArgs, cfg: &PipelineConfig, out: &Path, back: bool) -> CliResult<Vec<String>> {
    let (model, tok) = load_model_dir(&a.model)?;
    let c = load(&a.input, cfg)?;
    let r = if back {
        backtranslate_corpus(&model, &tok, &c, cfg.decode.beam)?
    } else {
        refine_corpus(&model, &tok, &c, cfg.decode.beam)?
    };
    if r.corpus.len() != c.len() {
        return Err(CliError::data("decoding changed the corpus size"));
    }
    let stem = if back { "backtranslated" } else { "refined" };
    Ok(vec![
        save(&r.corpus, out, stem, cfg)?,
        write_json(out, &format!("{stem}.json"), &refine_stats(&r))?,
    ])
}

fn cmd_evaluate(a: &EvaluateArgs, cfg: &PipelineConfig, out: &Path) -> CliResult<Vec<String>> {
    let test = load(&a.test, cfg)?;
    let hyps: Vec<String> = match (&a.model, &a.hyps) {
        (Some(m), _) => {
            let (model, tok) = load_model_dir(m)?;
            translate_corpus(&model, &tok, &test, cfg.decode.beam)?
        }
        (None, Some(h)) => fs::read_to_string(h)
            .map_err(|e| io_err(h, e))?
            .lines()
            .map(str::to_string)
            .collect(),
        (None, None) => return Err(CliError::config("--model", "need --model or --hyps")),
    };
    let report = evaluate_hyps(&hyps, &targets(&test))?;
    let mut names = Vec::new();
    if a.model.is_some() {
        names.push(write_text(out, "hyps.txt", &(hyps.join("\n") + "\n"))?);
    }
    names.push(write_json(out, "eval.json", &report)?);
    names.push(write_text(
        out,
        "eval.tsv",
        &format!("metric\tscore\nbleu\t{:.4}\nchrf\t{:.4}\n", report.bleu, report.chrf),
    )?);
    Ok(names)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub edits: bitext_core::metrics::EditFractionReport,
    pub ttr_original_src: bitext_core::metrics::TypeTokenRatio,
    pub ttr_original_tgt: bitext_core::metrics::TypeTokenRatio,
    pub ttr_refined_src: bitext_core::metrics::TypeTokenRatio,
    pub ttr_refined_tgt: bitext_core::metrics::TypeTokenRatio,
}

pub fn analyze(original: &Corpus, refined: &Corpus) -> CliResult<Analysis> {
    Ok(Analysis {
        edits: edited_fraction(original, refined)?,
        ttr_original_src: type_token_ratio(original.side_texts(Side::Src)),
        ttr_original_tgt: type_token_ratio(original.side_texts(Side::Tgt)),
        ttr_refined_src: type_token_ratio(refined.side_texts(Side::Src)),
        ttr_refined_tgt: type_token_ratio(refined.side_texts(Side::Tgt)),
    })
}

fn cmd_analyze(a: &AnalyzeArgs, cfg: &PipelineConfig, out: &Path) -> CliResult<Vec<String>> {
    let report = analyze(&load(&a.original, cfg)?, &load(&a.refined, cfg)?)?;
    let e = &report.edits;
    let tsv = format!(
        "pct_src_edited={:.2}\npct_tgt_edited={:.2}\npct_any_edited={:.2}\nttr_src={:.2}->{:.2}\nttr_tgt={:.2}->{:.2}\n",
        e.pct_src_edited,
        e.pct_tgt_edited,
        e.pct_both,
        report.ttr_original_src.ratio,
        report.ttr_refined_src.ratio,
        report.ttr_original_tgt.ratio,
        report.ttr_refined_tgt.ratio,
    );
    Ok(vec![
        write_json(out, "analysis.json", &report)?,
        write_text(out, "analysis.txt", &tsv)?,
    ])
}
