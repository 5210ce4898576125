//! Training, evaluation and cost accounting.

mod check;
mod cost;
mod e2e;
mod eval;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::model::{Architecture, ModelConfig, ModelError};
use crate::numerics::NumericsError;
use crate::windowing::{WindowConfig, WindowError};

pub use check::{model_grad_check, GradCheckSetup};
pub use cost::{cost_report, CostReport};
pub use e2e::{end_to_end, EndToEndReport};
pub use eval::{
    evaluate, frame_accuracy, frame_match_counts, predict_corpus, EvalReport, MatchMode, PrfRow,
};
pub use train::{prepare_documents, train, EpochLog, RunLog, StepLog, TrainOutcome};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("no trainable segments: every window holds fewer than two entities")]
    NoSegments,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
}

pub type Result<T, E = TrainError> = std::result::Result<T, E>;

/// Layer sizes of the network. Vocabulary, label and class counts are
/// derived from the training data and schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSpec {
    pub d_model: usize,
    pub encoder_layers: usize,
    pub encoder_heads: usize,
    pub ffn_dim: usize,
    pub label_emb_dim: usize,
    pub fusion_heads: usize,
    pub relpos_emb_dim: usize,
    pub hidden_dim: usize,
    pub max_rel_dist: usize,
    pub max_seq_len: usize,
    pub dropout: f64,
}

impl Default for ModelSpec {
    fn default() -> Self {
        let c = ModelConfig::new(1, 1, 2);
        ModelSpec {
            d_model: c.d_model,
            encoder_layers: c.encoder_layers,
            encoder_heads: c.encoder_heads,
            ffn_dim: c.ffn_dim,
            label_emb_dim: c.label_emb_dim,
            fusion_heads: c.fusion_heads,
            relpos_emb_dim: c.relpos_emb_dim,
            hidden_dim: c.hidden_dim,
            max_rel_dist: c.max_rel_dist,
            max_seq_len: c.max_seq_len,
            dropout: c.dropout,
        }
    }
}

impl ModelSpec {
    pub fn to_config(&self, vocab_size: usize, label_count: usize, num_classes: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            vocab_size,
            d_model: self.d_model,
            encoder_layers: self.encoder_layers,
            encoder_heads: self.encoder_heads,
            ffn_dim: self.ffn_dim,
            label_count,
            label_emb_dim: self.label_emb_dim,
            fusion_heads: self.fusion_heads,
            relpos_emb_dim: self.relpos_emb_dim,
            hidden_dim: self.hidden_dim,
            num_classes,
            max_rel_dist: self.max_rel_dist,
            max_seq_len: self.max_seq_len,
            dropout: self.dropout,
            seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub batch_size: usize,
    pub epochs: usize,
    pub peak_lr: f64,
    /// Share of optimizer steps spent warming up.
    pub warmup_fraction: f64,
    pub window_chars: usize,
    pub stride_chars: usize,
    pub frame_augmentation: bool,
    /// Loss weight of pairs whose gold class is `NULL_REL`.
    pub null_weight: f64,
    pub seed: u64,
    pub model: ModelSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            architecture: Architecture::Pairwise,
            batch_size: 10,
            epochs: 60,
            peak_lr: 1e-4,
            warmup_fraction: 0.1,
            window_chars: 300,
            stride_chars: 150,
            frame_augmentation: false,
            null_weight: 1.0,
            seed: 0,
            model: ModelSpec::default(),
        }
    }
}

impl TrainConfig {
    pub fn window(&self) -> WindowConfig {
        WindowConfig::with_stride(self.window_chars, self.stride_chars)
    }

    pub fn check(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(TrainError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(TrainError::InvalidConfig("epochs must be >= 1".into()));
        }
        if !(self.peak_lr.is_finite() && self.peak_lr >= 0.0) {
            return Err(TrainError::InvalidConfig(format!("peak_lr {}", self.peak_lr)));
        }
        if !(0.0..=1.0).contains(&self.warmup_fraction) {
            return Err(TrainError::InvalidConfig(format!(
                "warmup_fraction {} outside [0, 1]",
                self.warmup_fraction
            )));
        }
        if !(self.null_weight.is_finite() && self.null_weight > 0.0) {
            return Err(TrainError::InvalidConfig(format!("null_weight {}", self.null_weight)));
        }
        self.window().check()?;
        Ok(())
    }
}
