//! Gradient-boosted regression trees with a softmax objective.
//!
//! Every round fits one tree per class to the current gradient and hessian of
//! the multiclass log-loss; the eta-scaled leaf weights are summed into the
//! class margins and the identity is the argmax of the resulting softmax.

mod model;
mod objective;
mod tree;

use serde::{Deserialize, Serialize};

pub use model::{
    train_boost, train_boost_with_history, BoostedModel, Prediction, BOOST_FORMAT_VERSION,
};
pub use objective::{log_loss, softmax_grad_hess, softmax_row};
pub use tree::{
    build_tree, build_tree_presorted, Node, RegressionTree, SortedColumns, MAX_TREE_DEPTH,
};

#[derive(Debug, thiserror::Error)]
pub enum BoostError {
    #[error("invalid boosting config: {0}")]
    Config(String),
    #[error("{0}")]
    Shape(String),
    #[error("no rows selected for tree construction")]
    EmptyRows,
    #[error("unsupported model format version {0}")]
    Version(u32),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub eta: f64,
    pub subsample: f64,
    pub max_depth: usize,
    pub rounds: usize,
    pub reg_lambda: f64,
    pub gamma: f64,
    pub seed: u64,
}

impl Default for BoostConfig {
    fn default() -> Self {
        BoostConfig {
            eta: 0.7,
            subsample: 0.9,
            max_depth: 6,
            rounds: 500,
            reg_lambda: 1.0,
            gamma: 0.0,
            seed: 0,
        }
    }
}

impl BoostConfig {
    pub fn validate(&self) -> Result<(), BoostError> {
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(BoostError::Config(format!(
                "eta must be in (0, 1], got {}",
                self.eta
            )));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(BoostError::Config(format!(
                "subsample must be in (0, 1], got {}",
                self.subsample
            )));
        }
        if self.max_depth == 0 || self.max_depth > MAX_TREE_DEPTH {
            return Err(BoostError::Config(format!(
                "max_depth must be in 1..={MAX_TREE_DEPTH}, got {}",
                self.max_depth
            )));
        }
        if self.rounds == 0 {
            return Err(BoostError::Config("rounds must be at least 1".into()));
        }
        if self.reg_lambda.is_nan()
            || self.reg_lambda < 0.0
            || self.gamma.is_nan()
            || self.gamma < 0.0
        {
            return Err(BoostError::Config(
                "reg_lambda and gamma must be non-negative".into(),
            ));
        }
        Ok(())
    }
}
