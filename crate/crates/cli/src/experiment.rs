//! Synthetic end-to-end comparison: five translation systems trained on
//! Pool A, Pool A after filtering, A∪B, A∪b(B) and A∪r(B), scored on a clean
//! held-out test set.

use std::path::Path;

use bitext_core::corpus::{gen_synthetic, split_pools, toy_tgt_word, Corpus, NoiseSpec, Side};
use bitext_core::dataset::{build_examples, BuildOptions, DatasetSplit, Directions};
use bitext_core::mine::{mine_candidates, write_candidates, EmbeddingIndex};
use bitext_core::model::{backtranslate_corpus, refine_corpus, EditorModel};
use bitext_core::tokenize::Tokenizer;
use serde::{Deserialize, Serialize};

use crate::commands::{
    analyze, build_split, embedder, evaluate_hyps, learn_tokenizer, noise_subset, refine_stats, save, save_model_dir,
    targets, train_model, translate_corpus, write_json, write_text, Analysis, RefineStats,
};
use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult, StageExt};

/// Row labels in table order.
pub const ROWS: [&str; 5] = ["Pool A", "Filtering", "A+B", "A+b(B)", "A+r(B)"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub system: String,
    pub train_pairs: usize,
    pub bleu: f64,
    pub chrf: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub refine_b: RefineStats,
    pub refine_a: RefineStats,
    /// Pool B against r(B).
    pub analysis_b: Analysis,
    /// Pool A against the editor's rewrite of it.
    pub analysis_a: Analysis,
    pub config_hash: String,
}

impl ExperimentReport {
    pub fn row(&self, name: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.system == name)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::from("system\ttrain_pairs\tbleu\tchrf\n");
        for r in &self.rows {
            s.push_str(&format!("{}\t{}\t{:.2}\t{:.2}\n", r.system, r.train_pairs, r.bleu, r.chrf));
        }
        s
    }
}

pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub outputs: Vec<String>,
}

struct Data {
    pool_a: Corpus,
    pool_b: Corpus,
    dev: Corpus,
    test: Corpus,
}

fn make_data(cfg: &PipelineConfig, out: &Path, outputs: &mut Vec<String>) -> CliResult<Data> {
    let x = &cfg.experiment;
    let s = &cfg.synth;
    let total = x.pool_a + x.pool_b + x.dev + x.test;
    let (clean, _) = gen_synthetic(total, s.vocab_size, (s.min_len, s.max_len), &NoiseSpec::zero(0), cfg.seed)?;
    let range = |a: usize, n: usize| clean.select(&(a..a + n).collect::<Vec<_>>());
    let a = range(0, x.pool_a);
    let b_clean = range(x.pool_a, x.pool_b);
    let dev = range(x.pool_a + x.pool_b, x.dev);
    let test = range(x.pool_a + x.pool_b + x.dev, x.test);
    let words: Vec<String> = (0..s.vocab_size).map(toy_tgt_word).collect();
    let b = noise_subset(&b_clean, s.noisy_fraction, &s.noise, &words)?;

    // Clean pairs land in Pool A, corrupted-block pairs in Pool B.
    let scores: Vec<f64> = std::iter::repeat_n(x.score_a, a.len())
        .chain(std::iter::repeat_n(x.score_b, b.len()))
        .collect();
    let scored = a.concat(&b)?.with_scores(&scores)?;
    let (pool_a, pool_b) = split_pools(&scored, cfg.pools.low, cfg.pools.high)?;
    if pool_a.len() != a.len() || pool_b.len() != b.len() {
        return Err(CliError::data("pool split does not recover the generated blocks"));
    }
    let dir = out.join("data");
    std::fs::create_dir_all(&dir).map_err(|e| CliError::data(e.to_string()))?;
    for (c, stem) in [(&scored, "scored"), (&pool_a, "a"), (&pool_b, "b"), (&dev, "dev"), (&test, "test")] {
        outputs.push(format!("data/{}", save(c, &dir, stem, cfg)?));
    }
    Ok(Data {
        pool_a: pool_a.without_scores(),
        pool_b: pool_b.without_scores(),
        dev,
        test,
    })
}

/// Trains a translation-only system on `train` (clean `dev` for selection)
/// and saves it under `<out>/<sub>/`.
#[allow(clippy::too_many_arguments)]
fn train_nmt(
    label: &str,
    sub: &str,
    train: &Corpus,
    dev: &Corpus,
    dirs: Directions,
    tok: &Tokenizer,
    cfg: &PipelineConfig,
    out: &Path,
    outputs: &mut Vec<String>,
) -> CliResult<EditorModel<f32>> {
    let opts = BuildOptions {
        max_len: cfg.nmt.max_len,
        ..BuildOptions::mt_only(dirs)
    };
    let (train_ex, _) = build_examples(train, None, tok, &opts)?;
    let (dev_ex, _) = build_examples(dev, None, tok, &opts)?;
    let split = DatasetSplit {
        train: train_ex,
        dev: dev_ex,
    };
    let (model, outcome) = train_model(label, &cfg.nmt, tok.vocab.len(), &split)?;
    outputs.extend(save_model_dir(&out.join(sub), &format!("{sub}/"), &model, &outcome, tok)?);
    Ok(model)
}

pub fn run(cfg: &PipelineConfig, out: &Path) -> CliResult<ExperimentOutput> {
    let mut outputs = Vec::new();
    let data = make_data(cfg, out, &mut outputs).stage("data")?;
    eprintln!(
        "[data] pool A {} pairs, pool B {} pairs, dev {}, test {}",
        data.pool_a.len(),
        data.pool_b.len(),
        data.dev.len(),
        data.test.len()
    );

    let tok = learn_tokenizer(&[&data.pool_a, &data.pool_b], cfg.tokenize.merges).stage("tokenize")?;
    tok.save(out).stage("tokenize")?;
    outputs.extend(["bpe.codes".to_string(), "vocab.txt".to_string()]);
    eprintln!("[tokenize] vocabulary {}", tok.vocab.len());

    // Editor: mined variants of Pool A, retrieved from the joint A∪B pools.
    let cands = (|| -> CliResult<_> {
        let emb = embedder(cfg);
        let pools = [&data.pool_a, &data.pool_b];
        let idx_src = EmbeddingIndex::from_corpus_side(&pools, Side::Src, &emb)?;
        let idx_tgt = EmbeddingIndex::from_corpus_side(&pools, Side::Tgt, &emb)?;
        let cands = mine_candidates(&data.pool_a, &idx_src, &idx_tgt, cfg.mine.k, &emb)?;
        let f = std::fs::File::create(out.join("candidates.jsonl")).map_err(|e| CliError::data(e.to_string()))?;
        write_candidates(&cands, f)?;
        Ok(cands)
    })()
    .stage("mine")?;
    outputs.push("candidates.jsonl".into());

    let editor = (|| -> CliResult<_> {
        let opts = BuildOptions {
            edit: true,
            mt: cfg.build.directions,
            include_mt: cfg.build.include_mt,
            upweight: cfg.build.upweight,
            max_len: cfg.model.max_len,
        };
        let (split, stats) = build_split(&data.pool_a, Some(&cands), &tok, &opts, cfg)?;
        eprintln!(
            "[editor] {} edit + {} mt examples (mt weight {}), {} train / {} dev",
            stats.edit_examples,
            stats.mt_examples,
            stats.mt_weight,
            split.train.len(),
            split.dev.len()
        );
        outputs.push(write_json(out, "editor_build.json", &stats)?);
        let (model, outcome) = train_model("editor", &cfg.model, tok.vocab.len(), &split)?;
        outputs.extend(save_model_dir(&out.join("editor"), "editor/", &model, &outcome, &tok)?);
        Ok(model)
    })()
    .stage("editor")?;

    let refine = |c: &Corpus, stem: &str, outputs: &mut Vec<String>| -> CliResult<_> {
        let r = refine_corpus(&editor, &tok, c, cfg.decode.beam)?;
        if r.corpus.len() != c.len() {
            return Err(CliError::data("refinement changed the corpus size"));
        }
        outputs.push(save(&r.corpus, out, stem, cfg)?);
        Ok(r)
    };
    let r_b = refine(&data.pool_b, "r_b", &mut outputs).stage("refine")?;
    let r_a = refine(&data.pool_a, "r_a", &mut outputs).stage("refine")?;
    eprintln!("[refine] r(B) {:?}", refine_stats(&r_b));

    let bt_model = train_nmt("backtranslation", "bt", &data.pool_a, &data.dev, Directions::EToF, &tok, cfg, out, &mut outputs)
        .stage("backtranslation")?;
    let b_b = backtranslate_corpus(&bt_model, &tok, &data.pool_b, cfg.decode.beam).stage("backtranslation")?;
    outputs.push(save(&b_b.corpus, out, "bt_b", cfg).stage("backtranslation")?);

    let union = |b: &Corpus| data.pool_a.concat(b);
    let systems: [(&str, &str, Corpus); 4] = [
        (ROWS[0], "sys_a", data.pool_a.clone()),
        (ROWS[2], "sys_a_b", union(&data.pool_b)?),
        (ROWS[3], "sys_a_btb", union(&b_b.corpus)?),
        (ROWS[4], "sys_a_rb", union(&r_b.corpus)?),
    ];
    let refs = targets(&data.test);
    let mut rows = Vec::new();
    for (name, sub, train) in &systems {
        let row = (|| -> CliResult<_> {
            let model = train_nmt(name, sub, train, &data.dev, Directions::FToE, &tok, cfg, out, &mut outputs)?;
            let hyps = translate_corpus(&model, &tok, &data.test, cfg.decode.beam)?;
            outputs.push(write_text(out, &format!("{sub}/hyps.txt"), &(hyps.join("\n") + "\n"))?);
            let e = evaluate_hyps(&hyps, &refs)?;
            eprintln!("[{name}] BLEU {:.2} chrF {:.2}", e.bleu, e.chrf);
            Ok(ReportRow {
                system: name.to_string(),
                train_pairs: train.len(),
                bleu: e.bleu,
                chrf: e.chrf,
            })
        })()
        .stage(name)?;
        rows.push(row);
    }
    // Filtering discards Pool B entirely, so its system is the Pool A system.
    let filtering = ReportRow {
        system: ROWS[1].to_string(),
        ..rows[0].clone()
    };
    rows.insert(1, filtering);

    let report = ExperimentReport {
        rows,
        refine_b: refine_stats(&r_b),
        refine_a: refine_stats(&r_a),
        analysis_b: analyze(&data.pool_b, &r_b.corpus)?,
        analysis_a: analyze(&data.pool_a, &r_a.corpus)?,
        config_hash: cfg.hash(),
    };
    outputs.push(write_json(out, "report.json", &report)?);
    outputs.push(write_text(out, "report.tsv", &report.to_tsv())?);
    Ok(ExperimentOutput { report, outputs })
}
