//! Probabilistic suffix tree: context counting, construction, scoring and
//! the model file.
//!
//! Construction follows the classical variable-order recipe. A context `s`
//! becomes a node when it is frequent enough (`p_min`), predicts some symbol
//! with at least `threshold` probability, and that prediction differs from
//! the one made by its parent `suffix(s)` by a factor of at least `tau` in
//! either direction. Every suffix of a kept context is kept as well, and all
//! distributions are floored by `epsilon`.

mod counts;
mod model;
mod score;
mod tree;

use thiserror::Error;

pub use counts::{count_contexts, count_contexts_sharded, merge_counts, ContextCounts, ContextStats};
pub use model::{load_model, save_model, save_model_at, ModelError, MODEL_VERSION};
pub use score::{flag_anomalies, score_sequence, Flagged, Score};
pub use tree::{build_tree, lookup_context, Pst, PstNode, TrainingMeta};

#[derive(Debug, Error, PartialEq)]
pub enum PstError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("count tables disagree on max context length ({0} vs {1})")]
    MaxLenMismatch(usize, usize),
    #[error("tree depth {depth} exceeds counted context length {max_len}")]
    DepthExceedsCounts { depth: usize, max_len: usize },
    #[error("symbol {symbol} is outside a vocabulary of {vocab_size}")]
    SymbolOutOfRange { symbol: u32, vocab_size: usize },
    #[error("flag limit must lie in (0, 1], got {0}")]
    InvalidLimit(f64),
}

/// Construction hyperparameters. Defaults are the usual starting point for
/// flow corpora: depth 14, `p_min` 1e-4, threshold 5e-4, `tau` 10, no smoothing.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PstParams {
    /// Maximum context length L.
    pub depth: usize,
    /// Minimum empirical frequency of a context to be considered.
    pub p_min: f64,
    /// Minimum next-symbol probability that can justify a node.
    pub threshold: f64,
    /// Ratio against the parent's prediction that makes a node informative.
    pub tau: f64,
    /// Additive floor mixed into every distribution.
    pub epsilon: f64,
}

impl Default for PstParams {
    fn default() -> Self {
        PstParams {
            depth: 14,
            p_min: 1e-4,
            threshold: 5e-4,
            tau: 10.0,
            epsilon: 0.0,
        }
    }
}

impl PstParams {
    /// Checks ranges that do not depend on the alphabet.
    pub fn validate(&self) -> Result<(), PstError> {
        let bad = |msg: String| Err(PstError::InvalidParams(msg));
        let prob = |v: f64| (0.0..=1.0).contains(&v);
        if self.depth < 1 {
            return bad("depth must be at least 1".into());
        }
        if !prob(self.p_min) {
            return bad(format!("p_min {} not in [0, 1]", self.p_min));
        }
        if !prob(self.threshold) {
            return bad(format!("threshold {} not in [0, 1]", self.threshold));
        }
        if !(self.tau >= 1.0 && self.tau.is_finite()) {
            return bad(format!("tau {} must be a finite ratio >= 1", self.tau));
        }
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return bad(format!("epsilon {} not in [0, 1)", self.epsilon));
        }
        Ok(())
    }

    /// Full check, including `epsilon < 1 / vocab_size` when smoothing is on.
    pub fn validate_for(&self, vocab_size: usize) -> Result<(), PstError> {
        self.validate()?;
        if self.epsilon > 0.0 && self.epsilon * vocab_size as f64 >= 1.0 {
            return Err(PstError::InvalidParams(format!(
                "epsilon {} must be below 1/{vocab_size}",
                self.epsilon
            )));
        }
        Ok(())
    }
}
