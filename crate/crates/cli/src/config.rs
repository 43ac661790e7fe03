//! Pipeline configuration. Values are layered: built-in defaults, then the
//! TOML file given by `--config`, then command-line flags.

use std::path::Path;

use bitext_core::corpus::{Format, NoiseSpec};
use bitext_core::dataset::Directions;
use bitext_core::model::ModelConfig;
use clap::Args;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub format: Format,
    pub src_lang: String,
    pub tgt_lang: String,
    pub synth: SynthConfig,
    pub pools: PoolConfig,
    pub mine: MineConfig,
    pub tokenize: TokenizeConfig,
    pub build: BuildConfig,
    pub decode: DecodeConfig,
    /// Editor model.
    pub model: ModelConfig,
    /// Translation-only systems of the experiment, including the
    /// back-translation model.
    pub nmt: ModelConfig,
    pub experiment: ExperimentConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub pairs: usize,
    pub vocab_size: usize,
    pub min_len: usize,
    pub max_len: usize,
    /// Share of pairs whose target is corrupted by `noise`.
    pub noisy_fraction: f64,
    pub noise: NoiseSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoolConfig {
    pub low: f64,
    pub high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MineConfig {
    pub k: usize,
    pub embed_dim: usize,
    /// Fold `f<n>`/`e<n>` toy words to a shared form before hashing.
    pub toy_lexicon: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TokenizeConfig {
    pub merges: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    pub include_mt: bool,
    pub upweight: bool,
    pub directions: Directions,
    pub dev_pairs: usize,
    pub dev_clean_only: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    pub beam: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pool_a: usize,
    pub pool_b: usize,
    pub dev: usize,
    pub test: usize,
    /// Scores assigned to the clean and the noisy block before pool splitting.
    pub score_a: f64,
    pub score_b: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 1,
            format: Format::Tsv,
            src_lang: "f".into(),
            tgt_lang: "e".into(),
            synth: SynthConfig::default(),
            pools: PoolConfig::default(),
            mine: MineConfig::default(),
            tokenize: TokenizeConfig::default(),
            build: BuildConfig::default(),
            decode: DecodeConfig::default(),
            // Desk-scale schedules: about 22 CPU minutes for the full
            // experiment on one core, with both models near convergence.
            model: ModelConfig {
                max_epochs: 25,
                max_tokens_per_batch: 1000,
                lr: 1e-3,
                label_smoothing: 0.1,
                ..ModelConfig::default()
            },
            nmt: ModelConfig {
                max_epochs: 40,
                max_tokens_per_batch: 500,
                lr: 1e-3,
                label_smoothing: 0.1,
                ..ModelConfig::default()
            },
            experiment: ExperimentConfig::default(),
        }
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            pairs: 1000,
            // large enough that 2,000 pairs leave the lexicon undertrained,
            // so extra (noisy or refined) data matters
            vocab_size: 1000,
            min_len: 4,
            max_len: 12,
            noisy_fraction: 0.4,
            noise: NoiseSpec {
                p_drop: 0.15,
                p_swap: 0.15,
                p_replace: 0.25,
                p_misalign: 0.3,
                seed: 7,
            },
        }
    }
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig { low: 1.05, high: 1.06 }
    }
}

impl Default for MineConfig {
    fn default() -> Self {
        MineConfig {
            k: 4,
            embed_dim: 256,
            toy_lexicon: true,
        }
    }
}

impl Default for TokenizeConfig {
    fn default() -> Self {
        TokenizeConfig { merges: 2000 }
    }
}

impl Default for BuildConfig {
    fn default() -> Self {
        BuildConfig {
            include_mt: true,
            upweight: true,
            directions: Directions::Both,
            dev_pairs: 100,
            dev_clean_only: false,
        }
    }
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig { beam: 1 }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            pool_a: 2000,
            pool_b: 2000,
            dev: 200,
            test: 500,
            score_a: 1.07,
            score_b: 1.055,
        }
    }
}

/// Flags that override config keys. Every flag is optional; unset flags leave
/// the config value alone.
#[derive(Args, Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConfigFlags {
    /// TOML config file.
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    /// Seed for data generation, splits and both trainers.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Pool B lower score bound (exclusive).
    #[arg(long, global = true)]
    pub low: Option<f64>,
    /// Pool A score threshold (inclusive).
    #[arg(long, global = true)]
    pub high: Option<f64>,
    /// Mining depth.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Number of BPE merges.
    #[arg(long, global = true)]
    pub merges: Option<usize>,
    /// Model width of the editor and of the translation systems.
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    /// Beam width for refinement and translation; 1 is greedy.
    #[arg(long, global = true)]
    pub beam: Option<usize>,
    /// Corpus file format: tsv or jsonl.
    #[arg(long, global = true, value_parser = parse_format)]
    pub format: Option<Format>,
    /// Keep only translation examples in the editor dev set.
    #[arg(long, global = true)]
    pub dev_clean_only: bool,
    /// Full-size model settings for the editor and translation systems.
    #[arg(long, global = true)]
    pub paper_preset: bool,
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse().map_err(|e: bitext_core::Error| e.to_string())
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl PipelineConfig {
    /// Defaults overlaid with a TOML document. Keys not given keep their
    /// default; unknown keys are rejected.
    pub fn from_toml_str(text: &str) -> CliResult<Self> {
        let over: toml::Value = toml::from_str(text).map_err(|e| CliError::config("config file", e.to_string()))?;
        let mut base = toml::Value::try_from(PipelineConfig::default())
            .map_err(|e| CliError::config("config", e.to_string()))?;
        merge(&mut base, over);
        base.try_into().map_err(|e: toml::de::Error| CliError::config("config file", e.to_string()))
    }

    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("--config", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Resolves flag > config file > default.
    pub fn resolve(flags: &ConfigFlags) -> CliResult<Self> {
        let mut c = match &flags.config {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        c.apply_flags(flags);
        c.validate()?;
        Ok(c)
    }

    pub fn apply_flags(&mut self, f: &ConfigFlags) {
        if f.paper_preset {
            let keep = |m: &ModelConfig| ModelConfig {
                seed: m.seed,
                ..ModelConfig::paper()
            };
            self.model = keep(&self.model);
            self.nmt = keep(&self.nmt);
        }
        // one flag reseeds data generation, splits and both trainers
        if let Some(s) = f.seed {
            self.seed = s;
            self.model.seed = s;
            self.nmt.seed = s;
        }
        if let Some(v) = f.low {
            self.pools.low = v;
        }
        if let Some(v) = f.high {
            self.pools.high = v;
        }
        if let Some(v) = f.k {
            self.mine.k = v;
        }
        if let Some(v) = f.merges {
            self.tokenize.merges = v;
        }
        if let Some(v) = f.dim {
            self.model.dim = v;
            self.nmt.dim = v;
        }
        if let Some(v) = f.beam {
            self.decode.beam = v;
        }
        if let Some(v) = f.format {
            self.format = v;
        }
        if f.dev_clean_only {
            self.build.dev_clean_only = true;
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let err = |f: &str, m: &str| CliError::config(f, m);
        if !(self.pools.low < self.pools.high) {
            return Err(err("pools.low", "must be below pools.high"));
        }
        if self.mine.k == 0 {
            return Err(err("mine.k", "must be positive"));
        }
        if self.mine.embed_dim == 0 {
            return Err(err("mine.embed_dim", "must be positive"));
        }
        if self.decode.beam == 0 {
            return Err(err("decode.beam", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.synth.noisy_fraction) {
            return Err(err("synth.noisy_fraction", "must lie in [0, 1]"));
        }
        if self.synth.vocab_size < 2 || self.synth.min_len == 0 || self.synth.min_len > self.synth.max_len {
            return Err(err("synth", "need vocab_size >= 2 and 1 <= min_len <= max_len"));
        }
        self.synth
            .noise
            .validate()
            .map_err(|e| err("synth.noise", &e.to_string()))?;
        self.model.validate().map_err(|e| err("model", &e.to_string()))?;
        self.nmt.validate().map_err(|e| err("nmt", &e.to_string()))?;
        for (name, l) in [("src_lang", &self.src_lang), ("tgt_lang", &self.tgt_lang)] {
            bitext_core::corpus::Lang::new(l.as_str()).map_err(|e| err(name, &e.to_string()))?;
        }
        if self.src_lang == self.tgt_lang {
            return Err(err("tgt_lang", "must differ from src_lang"));
        }
        let x = &self.experiment;
        if x.pool_a == 0 || x.test == 0 {
            return Err(err("experiment", "pool_a and test must be positive"));
        }
        let inside = |s: f64| s > self.pools.low && s < self.pools.high;
        if !(x.score_a >= self.pools.high) || !inside(x.score_b) {
            return Err(err(
                "experiment.score_a",
                "score_a must reach pools.high and score_b must lie strictly between the pool bounds",
            ));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn langs(&self) -> (bitext_core::corpus::Lang, bitext_core::corpus::Lang) {
        (
            self.src_lang.parse().expect("validated"),
            self.tgt_lang.parse().expect("validated"),
        )
    }
}
