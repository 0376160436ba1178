//! Run configuration: a flat JSON object whose unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Variant;

/// How the similarities of the selected neighbours become pooling weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GroupWeighting {
    /// Softmax over the selected similarities (a convex combination).
    #[default]
    Softmax,
    /// The raw dot-product similarities.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub variant: Variant,
    /// Frozen embedding columns (loaded from `embeddings.f32`).
    pub fixed_dim: usize,
    /// Trainable embedding columns appended to the frozen ones.
    pub learned_dim: usize,
    pub segment_len: usize,
    pub similar_users: usize,
    pub lambda: f64,
    pub batch_size: usize,
    pub lr: f64,
    /// Multiplier applied to the learning rate after every epoch.
    pub lr_decay: f64,
    pub epochs: usize,
    pub eval_negatives: usize,
    pub train_negatives: usize,
    pub k_list: Vec<usize>,
    pub seed: u64,
    pub init_std: f64,
    /// Keep only the most recent answers of every history.
    pub max_history: Option<usize>,
    pub group_weighting: GroupWeighting,
    /// Rebuild the personal cache every this many batches instead of once per epoch.
    pub cache_refresh_batches: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variant: Variant::AskMe,
            fixed_dim: 100,
            learned_dim: 28,
            segment_len: 5,
            similar_users: 5,
            lambda: 0.01,
            batch_size: 100,
            lr: 0.001,
            lr_decay: 0.5,
            epochs: 10,
            eval_negatives: 99,
            train_negatives: 4,
            k_list: vec![10, 20, 30, 40, 50],
            seed: 0,
            init_std: 0.1,
            max_history: None,
            group_weighting: GroupWeighting::Softmax,
            cache_refresh_batches: None,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn hidden_dim(&self) -> usize {
        self.fixed_dim + self.learned_dim
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.hidden_dim() == 0 {
            return bad("fixed_dim + learned_dim must be positive".into());
        }
        if self.segment_len == 0 {
            return bad("segment_len must be at least 1".into());
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad(format!("lambda must be non-negative, got {}", self.lambda));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad(format!("lr_decay must lie in (0, 1], got {}", self.lr_decay));
        }
        if self.k_list.is_empty() || self.k_list.contains(&0) {
            return bad("k_list must be non-empty with every K >= 1".into());
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return bad(format!("init_std must be positive, got {}", self.init_std));
        }
        if self.max_history == Some(0) {
            return bad("max_history must be at least 1 when set".into());
        }
        if self.cache_refresh_batches == Some(0) {
            return bad("cache_refresh_batches must be at least 1 when set".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_reported_settings() {
        let c = RunConfig::default();
        assert_eq!(c.hidden_dim(), 128);
        assert_eq!((c.segment_len, c.similar_users, c.batch_size), (5, 5, 100));
        assert_eq!((c.lr, c.lr_decay, c.init_std), (0.001, 0.5, 0.1));
        assert_eq!(c.k_list, vec![10, 20, 30, 40, 50]);
        assert_eq!((c.eval_negatives, c.train_negatives), (99, 4));
    }

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_json(r#"{"dropout": 0.5}"#).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("dropout"), "{err}");
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c = RunConfig::from_json(r#"{"variant": "AskMe_A", "epochs": 3, "k_list": [1, 5]}"#).unwrap();
        assert_eq!(c.variant, Variant::AskMeA);
        assert_eq!(c.epochs, 3);
        assert_eq!(c.k_list, vec![1, 5]);
        assert_eq!(c.segment_len, 5);
    }

    #[test]
    fn negative_lambda_and_unknown_variant_rejected() {
        assert!(RunConfig::from_json(r#"{"lambda": -0.1}"#).is_err());
        let err = RunConfig::from_json(r#"{"variant": "AskMe_Z"}"#).unwrap_err();
        assert!(err.to_string().contains("AskMe_Z"), "{err}");
    }

    #[test]
    fn json_round_trip() {
        let c = RunConfig { max_history: Some(1), ..RunConfig::default() };
        assert_eq!(RunConfig::from_json(&c.to_json()).unwrap(), c);
    }
}
