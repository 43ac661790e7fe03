//! Acceptance suite. Prints one PASS/FAIL line per criterion and fails if
//! any criterion fails. Select criteria by number:
//! `cargo test -p bitext-cli --test acceptance -- 3 5`.
//! `ACCEPTANCE_OUT=<dir>` keeps the artifacts of the pipeline criteria.

use std::collections::{HashMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::Instant;

use bitext_cli::experiment::{self, ExperimentReport};
use bitext_cli::{manifest, run_cli, PipelineConfig};
use bitext_core::corpus::{gen_synthetic, NoiseSpec, Side};
use bitext_core::dataset::{build_examples, weighted_mass, BuildOptions, DatasetSplit, Task, TrainingExample};
use bitext_core::metrics::{bleu, bleu_text, chrf, ter_labels, BleuOptions};
use bitext_core::mine::{cosine, mine_candidates, EmbeddingIndex, EmbeddingVector, HashEmbedder, Neighbor};
use bitext_core::model::{
    check_gradients, checkpoint_bytes, evaluate_nll, perplexity, read_checkpoint, rel_err, train, Batch,
    DecodeOptions, Dropper, EditorModel, ModelConfig,
};
use bitext_core::tokenize::{Tokenizer, LANG_E, LANG_F, MASK};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ex(pair: usize, in_f: &[u32], in_e: &[u32], target: &[u32], weight: u32) -> TrainingExample {
    TrainingExample {
        pair,
        task: if in_f == [MASK] || in_e == [MASK] { Task::Mt } else { Task::Edit },
        in_f: in_f.to_vec(),
        in_e: in_e.to_vec(),
        target: target.to_vec(),
        weight,
    }
}

fn jitter(m: &mut EditorModel<f64>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for t in m.params_mut().tensors_mut() {
        t.mapv_inplace(|v| v + rng.random_range(-0.3..0.3));
    }
}

fn small_config() -> ModelConfig {
    ModelConfig {
        dim: 8,
        ffn_dim: 16,
        heads: 2,
        layers: 2,
        dropout: 0.0,
        attn_dropout: 0.0,
        relu_dropout: 0.0,
        label_smoothing: 0.1,
        max_len: 32,
        ..ModelConfig::default()
    }
}

fn gradient_oracle() -> Check {
    let exs = [
        ex(0, &[7, 8, 9], &[10, 11], &[LANG_E, 10, 12], 1),
        ex(1, &[MASK], &[12, 13], &[LANG_F, 7, 7, 8], 2),
    ];
    let b = Batch::from_examples(&exs, 32).map_err(|e| e.to_string())?;
    // A finite difference straddling a ReLU kink is not a valid oracle, so
    // scan seeds for a perturbation-safe point.
    for seed in 0..16 {
        let mut m = EditorModel::<f64>::new(small_config(), 14).map_err(|e| e.to_string())?;
        jitter(&mut m, seed);
        let r = check_gradients(&m, &b, 1e-3).map_err(|e| e.to_string())?;
        if r.kink_crossings > 0 {
            continue;
        }
        ensure(r.checked == m.params().num_scalars(), || "not every scalar was checked".into())?;
        ensure(r.max_rel_err < 1e-3, || format!("worst {}", r.worst))?;
        return Ok(format!(
            "{} tensors, {} scalars, max rel err {:.2e} (seed {seed})",
            r.per_param.len(),
            r.checked,
            r.max_rel_err
        ));
    }
    Err("no kink-free point in 16 seeds".into())
}

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> EmbeddingVector {
    loop {
        let v: Vec<f32> = (0..dim).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        if let Ok(u) = EmbeddingVector::normalized(v) {
            return u;
        }
    }
}

fn knn_exactness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let dim = 16;
    let vectors: Vec<_> = (0..1000).map(|_| random_unit(&mut rng, dim)).collect();
    let lang = bitext_core::corpus::Lang::new("e").map_err(|e| e.to_string())?;
    let payloads = (0..vectors.len())
        .map(|i| bitext_core::corpus::Sentence::new(&format!("s{i}"), lang.clone()).unwrap())
        .collect();
    let idx = EmbeddingIndex::new(payloads, vectors.clone(), dim).map_err(|e| e.to_string())?;
    for q in 0..200 {
        let query = random_unit(&mut rng, dim);
        let mut all: Vec<Neighbor> = vectors
            .iter()
            .enumerate()
            .map(|(index, v)| Neighbor {
                index,
                cosine: cosine(&query, v).unwrap(),
            })
            .collect();
        all.sort_by(|a, b| b.cosine.partial_cmp(&a.cosine).unwrap().then(a.index.cmp(&b.index)));
        all.truncate(4);
        let got = idx.knn(&query, 4).map_err(|e| e.to_string())?;
        ensure(got == all, || format!("query {q}: {got:?} != {all:?}"))?;
    }
    Ok("200 queries x 1000 vectors, k=4".into())
}

fn ter_oracle() -> Check {
    let mut all: Vec<Vec<char>> = vec![vec![]];
    let mut frontier = all.clone();
    for _ in 0..4 {
        frontier = frontier
            .iter()
            .flat_map(|s| ['a', 'b'].map(|c| [s.clone(), vec![c]].concat()))
            .collect();
        all.extend(frontier.iter().cloned());
    }
    let mut pairs = 0;
    for h in &all {
        // breadth-first enumeration of single-token edits from h
        let mut dist = HashMap::from([(h.clone(), 0usize)]);
        let mut queue = VecDeque::from([h.clone()]);
        while let Some(s) = queue.pop_front() {
            let d = dist[&s];
            let mut next = Vec::new();
            for i in 0..s.len() {
                let mut t = s.clone();
                t.remove(i);
                next.push(t);
                let mut t = s.clone();
                t[i] = if s[i] == 'a' { 'b' } else { 'a' };
                next.push(t);
            }
            if s.len() < 4 {
                for i in 0..=s.len() {
                    for c in ['a', 'b'] {
                        let mut t = s.clone();
                        t.insert(i, c);
                        next.push(t);
                    }
                }
            }
            for t in next {
                if !dist.contains_key(&t) {
                    dist.insert(t.clone(), d + 1);
                    queue.push_back(t);
                }
            }
        }
        for r in &all {
            let (_, st) = ter_labels(h, r);
            ensure(st.s + st.d + st.i == dist[r], || format!("{h:?} -> {r:?}: {st:?} vs {}", dist[r]))?;
            ensure(st.c + st.s + st.d == r.len(), || format!("C+S+D != |ref| for {h:?} {r:?}"))?;
            ensure(st.c + st.s + st.i == h.len(), || format!("C+S+I != |hyp| for {h:?} {r:?}"))?;
            pairs += 1;
        }
    }
    Ok(format!("{pairs} pairs"))
}

fn metric_identities() -> Check {
    let (c, _) = gen_synthetic(100, 50, (3, 10), &NoiseSpec::zero(0), 4).map_err(|e| e.to_string())?;
    let texts: Vec<&str> = c.side_texts(Side::Tgt).collect();
    let b = bleu_text(&texts, &texts, BleuOptions::default()).map_err(|e| e.to_string())?;
    ensure((b.score - 100.0).abs() <= 1e-9, || format!("BLEU identity {}", b.score))?;
    let f = chrf(&texts, &texts, 6, 2.0).map_err(|e| e.to_string())?;
    ensure((f.score - 100.0).abs() <= 1e-9, || format!("chrF identity {}", f.score))?;

    let opts = BleuOptions::default();
    let words = |s: &str| vec![s.split(' ').map(str::to_string).collect::<Vec<_>>()];
    let score = |h: &str, r: &str| bleu(&words(h), &words(r), opts).map(|x| x.score).map_err(|e| e.to_string());
    // repeated unigram: p1 = 1/3 clipped, higher orders smoothed
    let s1 = score("the the the", "the cat")?;
    let o1 = 100.0 * (1.0f64 / 3.0 * 1.0 / 3.0 * 1.0 / 2.0 * 1.0).powf(0.25);
    ensure((s1 - o1).abs() <= 1e-9, || format!("clipping case {s1} vs {o1}"))?;
    // short hypothesis with perfect precision: brevity penalty only
    let s2 = score("the cat", "the cat sat")?;
    let o2 = 100.0 * (-0.5f64).exp();
    ensure((s2 - o2).abs() <= 1e-9, || format!("brevity case {s2} vs {o2}"))?;
    // unsmoothed, a zero 2-gram precision zeroes the score
    let plain = BleuOptions { smooth: false, ..opts };
    let s3 = bleu(&words("the the the"), &words("the cat"), plain).map_err(|e| e.to_string())?.score;
    ensure(s3 == 0.0, || format!("unsmoothed case {s3}"))?;
    Ok(format!("identities exact, BLEU cases {s1:.6} {s2:.6} {s3:.1}"))
}

fn loss_wiring() -> Check {
    let cfg = ModelConfig {
        label_smoothing: 0.0,
        ..ModelConfig::default()
    };
    let v = 500;
    let m = EditorModel::<f32>::new(cfg, v).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut exs = Vec::new();
    for i in 0..16 {
        let mut s = || (0..8).map(|_| rng.random_range(7..v as u32)).collect::<Vec<_>>();
        let (a, b, mut t) = (s(), s(), s());
        t.insert(0, LANG_E);
        exs.push(ex(i, &a, &b, &t, 1));
    }
    let b = Batch::from_examples(&exs, 128).map_err(|e| e.to_string())?;
    let l = m.loss(&b, 0.0).map_err(|e| e.to_string())?.loss;
    let lnv = (v as f64).ln();
    let init = (l - lnv).abs() / lnv;
    ensure(init < 0.05, || format!("initial loss {l} vs ln|V| {lnv}"))?;

    let mut m = EditorModel::<f64>::new(small_config(), 14).map_err(|e| e.to_string())?;
    jitter(&mut m, 5);
    let a = ex(0, &[7, 8], &[9], &[LANG_E, 9, 10], 1);
    let c = ex(1, &[MASK], &[11, 12], &[LANG_F, 13], 1);
    let a3 = TrainingExample { weight: 3, ..a.clone() };
    let weighted = Batch::from_examples([&a3, &c], 32).map_err(|e| e.to_string())?;
    let repeated = Batch::from_examples([&a, &a, &a, &c], 32).map_err(|e| e.to_string())?;
    let (lw, gw) = m.loss_and_grads(&weighted, &mut Dropper::eval()).map_err(|e| e.to_string())?;
    let (lr, gr) = m.loss_and_grads(&repeated, &mut Dropper::eval()).map_err(|e| e.to_string())?;
    ensure(rel_err(lw.loss, lr.loss) < 1e-12, || format!("weighted loss {} vs repeated {}", lw.loss, lr.loss))?;
    ensure(lw.weight == lr.weight, || "weighted token mass differs".into())?;
    // relative error over the whole gradient vector; exact-zero tensors
    // (attention key biases) carry only round-off
    let (mut d2, mut n2) = (0.0f64, 0.0f64);
    for (x, y) in gw.tensors().iter().zip(gr.tensors()) {
        d2 += x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>();
        n2 += y.iter().map(|q| q * q).sum::<f64>();
    }
    let worst = (d2 / n2).sqrt();
    ensure(worst < 1e-12, || format!("weighted gradients differ by {worst:e}"))?;

    let m = m.cast::<f32>();
    let all = [a3, c];
    let nll = evaluate_nll(&m, &all).map_err(|e| e.to_string())?.nll;
    let ppl = perplexity(&m, &all).map_err(|e| e.to_string())?;
    ensure((ppl - nll.exp()).abs() <= 1e-9 * ppl, || format!("ppl {ppl} vs exp(nll) {}", nll.exp()))?;
    Ok(format!("init loss {l:.3} vs ln|V| {lnv:.3} ({:.1}%), weight=repetition, ppl=exp(nll)", 100.0 * init))
}

fn overfit() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let exs: Vec<TrainingExample> = (0..20)
        .map(|i| {
            let n = rng.random_range(2..6);
            let f: Vec<u32> = (0..n).map(|_| rng.random_range(7..20)).collect();
            let e: Vec<u32> = f.iter().rev().map(|&t| t + 13).collect();
            if i % 2 == 0 {
                ex(i, &f, &[MASK], &[&[LANG_E][..], &e].concat(), 1)
            } else {
                ex(i, &[MASK], &e, &[&[LANG_F][..], &f].concat(), 1)
            }
        })
        .collect();
    let cfg = ModelConfig {
        dim: 32,
        ffn_dim: 64,
        heads: 4,
        layers: 1,
        dropout: 0.0,
        label_smoothing: 0.0,
        lr: 3e-3,
        warmup_updates: 10,
        max_epochs: 200,
        max_len: 32,
        ..ModelConfig::default()
    };
    let split = DatasetSplit {
        train: exs.clone(),
        dev: vec![],
    };
    let mut m = EditorModel::<f32>::new(cfg, 34).map_err(|e| e.to_string())?;
    let out = train(&mut m, &split, &mut |_| {}).map_err(|e| e.to_string())?;
    let last = out.log.last().ok_or("no epochs")?;
    ensure(last.train_loss < 0.1, || format!("final loss {}", last.train_loss))?;
    let inputs: Vec<_> = exs.iter().map(|e| (e.in_f.clone(), e.in_e.clone())).collect();
    let decoded = m.decode_many(&inputs, &DecodeOptions::default()).map_err(|e| e.to_string())?;
    for (e, d) in exs.iter().zip(&decoded) {
        ensure(d.lang == LANG_E || d.lang == LANG_F, || format!("first token {} is not a language id", d.lang))?;
        ensure(d.lang == e.target[0] && d.tokens == e.target[1..], || {
            format!("example {}: decoded {:?} {:?}, want {:?}", e.pair, d.lang, d.tokens, e.target)
        })?;
    }
    Ok(format!("loss {:.4} after {} epochs, 20/20 reproduced", last.train_loss, out.log.len()))
}

fn upweighting() -> Check {
    let noise = NoiseSpec {
        p_replace: 0.3,
        p_drop: 0.1,
        ..NoiseSpec::zero(3)
    };
    let (clean, noisy) = gen_synthetic(1000, 100, (3, 8), &noise, 3).map_err(|e| e.to_string())?;
    let emb = HashEmbedder::toy(256);
    let pools = [&clean, &noisy];
    let s = EmbeddingIndex::from_corpus_side(&pools, Side::Src, &emb).map_err(|e| e.to_string())?;
    let t = EmbeddingIndex::from_corpus_side(&pools, Side::Tgt, &emb).map_err(|e| e.to_string())?;
    let cands = mine_candidates(&clean, &s, &t, 4, &emb).map_err(|e| e.to_string())?;
    let texts = pools
        .iter()
        .flat_map(|c| c.side_texts(Side::Src).chain(c.side_texts(Side::Tgt)));
    let tok = Tokenizer::learn(texts, 500).map_err(|e| e.to_string())?;
    let (exs, stats) = build_examples(&clean, Some(&cands), &tok, &BuildOptions::default()).map_err(|e| e.to_string())?;
    let edit = stats.edit_examples as f64;
    let mt = weighted_mass(&exs, Task::Mt) as f64;
    ensure(weighted_mass(&exs, Task::Edit) as f64 == edit, || "EDIT examples carry weight".into())?;
    let gap = (mt - edit).abs() / edit;
    ensure(gap <= 1e-3, || format!("MT mass {mt} vs EDIT count {edit}"))?;
    Ok(format!("EDIT {edit}, weighted MT {mt} ({:.3}%)", 100.0 * gap))
}

/// Artifacts root: `ACCEPTANCE_OUT` if set, otherwise a temporary directory
/// that lives for the whole process.
fn work_dir(name: &str) -> PathBuf {
    static TMP: OnceLock<tempfile::TempDir> = OnceLock::new();
    let root = match std::env::var_os("ACCEPTANCE_OUT") {
        Some(d) => PathBuf::from(d),
        None => TMP.get_or_init(|| tempfile::tempdir().unwrap()).path().to_path_buf(),
    };
    let d = root.join(name);
    if d.exists() {
        std::fs::remove_dir_all(&d).unwrap();
    }
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn experiment_report() -> &'static Result<ExperimentReport, String> {
    static REPORT: OnceLock<Result<ExperimentReport, String>> = OnceLock::new();
    REPORT.get_or_init(|| {
        let out = work_dir("experiment");
        let cfg = PipelineConfig::default();
        experiment::run(&cfg, &out).map(|o| o.report).map_err(|e| e.to_string())
    })
}

fn directional() -> Check {
    let r = experiment_report().as_ref().map_err(Clone::clone)?;
    let bleu = |s: &str| r.row(s).map(|x| x.bleu).ok_or(format!("missing row {s}"));
    let (rb, ab, filt) = (bleu("A+r(B)")?, bleu("A+B")?, bleu("Filtering")?);
    let table = r
        .rows
        .iter()
        .map(|x| format!("{} {:.2}", x.system, x.bleu))
        .collect::<Vec<_>>()
        .join(", ");
    ensure(rb >= ab + 2.0 && rb >= filt + 2.0, || format!("BLEU {table}"))?;
    Ok(format!("BLEU {table}"))
}

fn overediting() -> Check {
    let r = experiment_report().as_ref().map_err(Clone::clone)?;
    let input = PipelineConfig::default().experiment.pool_a;
    let out = r.refine_a.pairs;
    ensure(out == input, || format!("{input} pairs in, {out} out"))?;
    let unchanged = 100.0 - r.analysis_a.edits.pct_both;
    ensure(unchanged >= 80.0, || format!("only {unchanged:.1}% of Pool A unchanged"))?;
    Ok(format!("{unchanged:.1}% of {input} Pool A pairs unchanged, size preserved"))
}

const SMALL_CONFIG: &str = r#"
seed = 5
[synth]
pairs = 120
vocab_size = 30
min_len = 2
max_len = 6
[tokenize]
merges = 60
[build]
dev_pairs = 10
[model]
dim = 16
ffn_dim = 32
heads = 2
layers = 1
max_epochs = 2
max_len = 48
[nmt]
dim = 16
ffn_dim = 32
heads = 2
layers = 1
max_epochs = 2
max_len = 48
[experiment]
pool_a = 60
pool_b = 60
dev = 10
test = 10
"#;

fn cli(args: &[&str]) -> Result<(), String> {
    let argv = std::iter::once("bitext").chain(args.iter().copied()).map(String::from).collect();
    run_cli(argv).map_err(|e| format!("bitext {}: {e}", args.join(" ")))
}

fn reproducibility() -> Check {
    let root = work_dir("pipeline");
    let conf = root.join("config.toml");
    std::fs::write(&conf, SMALL_CONFIG).map_err(|e| e.to_string())?;
    let p = |s: &str| root.join(s).to_string_lossy().into_owned();
    let c = conf.to_string_lossy().into_owned();
    let steps: Vec<(&str, Vec<String>)> = vec![
        ("gen", vec!["gen".into()]),
        ("score", vec!["score".into(), p("gen/noisy.tsv")]),
        ("split", vec!["split-pools".into(), p("score/scored.tsv")]),
        ("mine", vec!["mine".into(), "--corpus".into(), p("gen/clean.tsv"), "--pool".into(), p("gen/noisy.tsv")]),
        (
            "build",
            vec!["build".into(), "--corpus".into(), p("gen/clean.tsv"), "--candidates".into(), p("mine/candidates.jsonl")],
        ),
        ("train", vec!["train".into(), "--data".into(), p("build")]),
        ("refine", vec!["refine".into(), "--model".into(), p("train"), p("gen/noisy.tsv")]),
        ("bt", vec!["backtranslate".into(), "--model".into(), p("train"), p("gen/noisy.tsv")]),
        ("eval", vec!["evaluate".into(), "--test".into(), p("gen/clean.tsv"), "--model".into(), p("train")]),
        ("analyze", vec!["analyze".into(), "--original".into(), p("gen/noisy.tsv"), "--refined".into(), p("refine/refined.tsv")]),
        ("experiment", vec!["experiment".into()]),
    ];
    let mut files = 0;
    for (dir, args) in &steps {
        let out = p(dir);
        let mut argv: Vec<&str> = vec!["--config", &c, "-o", &out];
        argv.extend(args.iter().map(String::as_str));
        cli(&argv)?;
        let m = manifest::read_manifest(&Path::new(&out).join(format!("{}.manifest.json", args[0])))
            .map_err(|e| e.to_string())?;
        let again = root.join(format!("{dir}.rerun"));
        let report = manifest::rerun(&m, &again).map_err(|e| e.to_string())?;
        ensure(report.differing.is_empty(), || format!("{dir}: {:?} differ", report.differing))?;
        ensure(report.identical.len() == m.outputs.len(), || format!("{dir}: outputs missing on rerun"))?;
        files += report.identical.len();
    }
    let bytes = std::fs::read(root.join("train/model.ckpt")).map_err(|e| e.to_string())?;
    let (model, meta) = read_checkpoint(&bytes).map_err(|e| e.to_string())?;
    ensure(checkpoint_bytes(&model, meta).map_err(|e| e.to_string())? == bytes, || "checkpoint does not round-trip".into())?;
    Ok(format!("{} subcommands rerun, {files} artifacts byte-identical, checkpoint bit-exact", steps.len()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "gradient oracle", gradient_oracle),
        (2, "kNN exactness", knn_exactness),
        (3, "TER-label oracle", ter_oracle),
        (4, "metric identities", metric_identities),
        (5, "loss wiring", loss_wiring),
        (6, "overfit smoke test", overfit),
        (7, "upweighting contract", upweighting),
        (8, "directional comparison", directional),
        (9, "overediting bound", overediting),
        (10, "reproducibility", reproducibility),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (id, name, f) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let t = Instant::now();
        let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match r {
            Ok(d) => println!("PASS  {id:>2} {name}: {d} [{secs:.1}s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL  {id:>2} {name}: {d} [{secs:.1}s]");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
