//! Attention-based encoder–decoder LSTM.
//!
//! A sample passes through a stack of sigmoid dense layers and an LSTM cell
//! whose final output is the code `C`. A separate affine map of the last
//! step's `[input, previous hidden, previous cell]` yields unnormalized
//! attention scores; their softmax weights `C` elementwise into `C_att`, which
//! a small decoder maps to class logits. After training, `C_att` is the deep
//! feature handed to the boosted classifier.

mod adam;
mod layers;
mod model;
mod train;

use serde::{Deserialize, Serialize};

pub use adam::{adam_step, adam_update, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPSILON};
pub use layers::{
    attention_weights, dense_forward, lstm_step, softmax, Activation, Affine, Dense, LstmCell,
};
pub use model::{loss, AttentionRnn, ForwardOutput, Gradients, NN_FORMAT_VERSION};
pub use train::{extract_features, gradients, train, TrainOutcome};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NnError {
    #[error("invalid network config: {0}")]
    Config(String),
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite values in layer {layer} ({name})")]
    NonFinite { layer: usize, name: &'static str },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },
    #[error("model JSON: {0}")]
    Format(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Channels per time step.
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub encoder_dense_layers: usize,
    /// LSTM cells, which is also the code and deep-feature dimension.
    pub lstm_cells: usize,
    pub decoder_hidden: usize,
    pub output_dim: usize,
    /// Recurrence steps per sample; a sample holds `seq_len * input_dim` values.
    pub seq_len: usize,
    pub learning_rate: f64,
    pub l2_lambda: f64,
    pub n_iter: usize,
    pub batch_count: usize,
    /// Parameters are initialized uniformly in `[-init_scale, init_scale]`.
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            input_dim: 14,
            hidden_dim: 164,
            encoder_dense_layers: 3,
            lstm_cells: 164,
            decoder_hidden: 164,
            output_dim: 8,
            seq_len: 1,
            learning_rate: 0.001,
            l2_lambda: 0.001,
            n_iter: 2000,
            batch_count: 7,
            init_scale: 0.1,
            seed: 0,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        let dims = [
            ("input_dim", self.input_dim),
            ("hidden_dim", self.hidden_dim),
            ("lstm_cells", self.lstm_cells),
            ("decoder_hidden", self.decoder_hidden),
            ("output_dim", self.output_dim),
            ("seq_len", self.seq_len),
            ("batch_count", self.batch_count),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(NnError::Config(format!("{name} must be at least 1")));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::Config("learning_rate must be positive".into()));
        }
        if self.l2_lambda.is_nan() || self.l2_lambda < 0.0 {
            return Err(NnError::Config("l2_lambda must be non-negative".into()));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(NnError::Config("init_scale must be non-negative".into()));
        }
        Ok(())
    }

    /// Values per sample fed to the network.
    pub fn sample_len(&self) -> usize {
        self.input_dim * self.seq_len
    }

    /// Width of the encoder output fed to the LSTM at each step.
    pub fn encoder_out(&self) -> usize {
        if self.encoder_dense_layers == 0 {
            self.input_dim
        } else {
            self.hidden_dim
        }
    }
}
