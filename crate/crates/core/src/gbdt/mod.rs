//! Histogram gradient-boosted decision trees for BAD-vs-GOOD classification.
//!
//! Trees are grown leaf-wise on quantile-binned features with the
//! second-order logistic-loss step. A trained [`Model`] reports a raw score,
//! the BAD probability and a normalized margin in `[-1, 1]`:
//!
//! ```text
//! margin = clamp((raw - base_score) / norm_constant, -1, 1)
//! norm_constant = sum over trees of max_leaf |learning_rate * leaf_value|
//! ```
//!
//! When every tree outputs `±alpha_t` this is the classic voting margin
//! `sum alpha_t h_t(x) / sum alpha_t`. The normalization is a convention of
//! this crate; other choices (raw margin, per-tree averages) order soundings
//! differently across models but identically within one model.

mod bins;
mod io;
mod loss;
mod model;
mod train;
mod tree;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bins::{bin_index, build_bins, feature_edges};
pub use io::{load_model, read_model, save_model, write_model, MODEL_FORMAT_VERSION};
pub use loss::{grad_hess, logistic, logistic_loss, mean_logistic_loss};
pub use model::{Model, Score};
pub use train::{train, train_with_history, TrainSet};
pub use tree::{Node, Tree};

#[derive(Debug, Error)]
pub enum GbdtError {
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error("expected {expected} features, got {found}")]
    FeatureMismatch { expected: usize, found: usize },
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("unsupported model format version {0:?}")]
    Version(String),
    #[error("model file line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub num_rounds: usize,
    pub learning_rate: f64,
    pub max_leaves: usize,
    pub min_samples_leaf: usize,
    pub num_bins: usize,
    pub lambda_l2: f64,
    /// Reserved for stochastic variants; the current trainer is fully
    /// deterministic and does not sample.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            num_rounds: 100,
            learning_rate: 0.1,
            max_leaves: 31,
            min_samples_leaf: 20,
            num_bins: 255,
            lambda_l2: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), GbdtError> {
        let bad = |m: &str| Err(GbdtError::InvalidConfig(m.into()));
        if self.num_rounds == 0 {
            return bad("num_rounds must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return bad("learning_rate must lie in (0, 1]");
        }
        if self.max_leaves < 2 {
            return bad("max_leaves must be at least 2");
        }
        if self.min_samples_leaf == 0 {
            return bad("min_samples_leaf must be positive");
        }
        if !(2..=256).contains(&self.num_bins) {
            return bad("num_bins must lie in [2, 256]");
        }
        if !(self.lambda_l2 >= 0.0 && self.lambda_l2.is_finite()) {
            return bad("lambda_l2 must be a non-negative number");
        }
        Ok(())
    }
}
