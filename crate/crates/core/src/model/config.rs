use serde::{Deserialize, Serialize};

use crate::dataset::DEFAULT_MAX_LEN;
use crate::error::{Error, Result};

/// Architecture and optimisation settings of the editor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub dim: usize,
    pub ffn_dim: usize,
    pub heads: usize,
    /// Encoder and decoder depth.
    pub layers: usize,
    pub dropout: f64,
    pub attn_dropout: f64,
    pub relu_dropout: f64,
    pub label_smoothing: f64,
    pub lr: f64,
    pub warmup_updates: usize,
    pub warmup_init_lr: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    /// Decoupled weight decay; 0 disables.
    pub weight_decay: f64,
    /// Global gradient-norm clip; 0 disables.
    pub clip_norm: f64,
    /// Source plus target tokens per update.
    pub max_tokens_per_batch: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without a dev improvement; 0 disables.
    pub patience: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            dim: 64,
            ffn_dim: 256,
            heads: 4,
            layers: 2,
            dropout: 0.1,
            attn_dropout: 0.0,
            relu_dropout: 0.0,
            label_smoothing: 0.2,
            lr: 5e-4,
            warmup_updates: 200,
            warmup_init_lr: 1e-7,
            adam_betas: (0.9, 0.98),
            adam_eps: 1e-8,
            weight_decay: 0.0,
            clip_norm: 0.0,
            max_tokens_per_batch: 2000,
            max_epochs: 50,
            patience: 0,
            max_len: DEFAULT_MAX_LEN,
            seed: 1,
        }
    }
}

impl ModelConfig {
    /// Full-size settings of the original large-scale setup, kept for reference.
    pub fn paper() -> Self {
        ModelConfig {
            dim: 512,
            ffn_dim: 4096,
            heads: 8,
            layers: 6,
            dropout: 0.4,
            attn_dropout: 0.2,
            relu_dropout: 0.2,
            label_smoothing: 0.2,
            lr: 1e-3,
            warmup_updates: 4000,
            weight_decay: 1e-4,
            max_tokens_per_batch: 4000,
            max_epochs: 100,
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" | "default" => Ok(Self::default()),
            "paper" => Ok(Self::paper()),
            _ => Err(Error::InvalidArgument(format!("unknown model preset {name:?}"))),
        }
    }

    pub fn head_dim(&self) -> usize {
        self.dim / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.dim == 0 || self.ffn_dim == 0 || self.heads == 0 || self.layers == 0 {
            return bad("dim, ffn_dim, heads and layers must be positive".into());
        }
        if !self.dim.is_multiple_of(self.heads) {
            return bad(format!("dim {} is not divisible by heads {}", self.dim, self.heads));
        }
        for (name, r) in [
            ("dropout", self.dropout),
            ("attn_dropout", self.attn_dropout),
            ("relu_dropout", self.relu_dropout),
            ("label_smoothing", self.label_smoothing),
        ] {
            if !(0.0..1.0).contains(&r) {
                return bad(format!("{name} {r} is outside [0, 1)"));
            }
        }
        let (b1, b2) = self.adam_betas;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            return bad("adam betas must lie in [0, 1)".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.warmup_init_lr >= 0.0) {
            return bad("learning rates must be positive".into());
        }
        if !(self.adam_eps > 0.0) || !(self.weight_decay >= 0.0) || !(self.clip_norm >= 0.0) {
            return bad("adam_eps must be positive, weight_decay and clip_norm non-negative".into());
        }
        if self.max_epochs == 0 {
            return bad("max_epochs must be positive".into());
        }
        if self.max_tokens_per_batch == 0 || self.max_len < 3 {
            return bad("max_tokens_per_batch must be positive and max_len at least 3".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        ModelConfig::default().validate().unwrap();
        ModelConfig::paper().validate().unwrap();
        assert_eq!(ModelConfig::paper().dim, 512);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let c = ModelConfig {
            dim: 10,
            heads: 4,
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = ModelConfig {
            dropout: 1.0,
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn partial_toml_style_json_fills_defaults() {
        let c: ModelConfig = serde_json::from_str(r#"{"dim": 32, "heads": 2}"#).unwrap();
        assert_eq!(c.dim, 32);
        assert_eq!(c.ffn_dim, 256);
        assert!(serde_json::from_str::<ModelConfig>(r#"{"dimm": 3}"#).is_err());
    }
}
