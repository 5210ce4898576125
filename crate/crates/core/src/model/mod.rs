//! Pairwise relation classifier and the per-pair marker baseline.
//!
//! Both architectures share the same small transformer [`Encoder`]. The
//! pairwise model encodes a segment once, fuses token-label embeddings through
//! an extra self-attention block and scores every ordered entity-head pair in
//! one batched head. The baseline re-encodes the segment once per candidate
//! pair with marker tokens around the two entities.

mod baseline;
mod layers;
mod pairwise;
mod predict;
mod vocab;

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CorpusError;
use crate::numerics::NumericsError;
use crate::windowing::WindowError;

pub use baseline::{marked_sequence, BaselinePairModel};
pub use layers::{Encoder, LayerNorm, Linear, MultiHeadAttention};
pub use pairwise::{PairwiseREModel, SegmentInput};
pub use predict::{
    predict_document, Architecture, LabelSource, PredictedRelation, Prediction, TrainedModel,
};
pub use vocab::{Vocab, MARKER_IDS, PAD_ID, UNK_ID};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Window(#[from] WindowError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("empty token sequence")]
    EmptySequence,
    #[error("sequence of {len} tokens exceeds the maximum of {max}")]
    SequenceTooLong { len: usize, max: usize },
    #[error("token id {id} outside vocabulary of {size}")]
    UnknownTokenId { id: usize, size: usize },
    #[error("label id {id} outside label inventory of {size}")]
    UnknownLabelId { id: usize, size: usize },
    #[error("{labels} labels for {tokens} tokens")]
    LabelLengthMismatch { tokens: usize, labels: usize },
    #[error("pair ({0}, {0}) relates a token to itself")]
    SelfPair(usize),
    #[error("pair index {index} outside sequence of {len}")]
    PairOutOfRange { index: usize, len: usize },
    #[error("loss over an empty target list")]
    EmptyTargets,
    #[error("marker insertion for entities at {0:?} and {1:?} overlaps")]
    OverlappingMarkers((usize, usize), (usize, usize)),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub encoder_layers: usize,
    pub encoder_heads: usize,
    pub ffn_dim: usize,
    /// Token label inventory, outside label included.
    pub label_count: usize,
    pub label_emb_dim: usize,
    pub fusion_heads: usize,
    pub relpos_emb_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    pub max_rel_dist: usize,
    pub max_seq_len: usize,
    pub dropout: f64,
    pub seed: u64,
}

impl ModelConfig {
    /// Default widths for the given vocabulary, label and class inventories.
    pub fn new(vocab_size: usize, label_count: usize, num_classes: usize) -> Self {
        ModelConfig {
            vocab_size,
            d_model: 64,
            encoder_layers: 2,
            encoder_heads: 4,
            ffn_dim: 128,
            label_count,
            label_emb_dim: 32,
            fusion_heads: 4,
            relpos_emb_dim: 75,
            hidden_dim: 256,
            num_classes,
            max_rel_dist: 128,
            max_seq_len: 512,
            dropout: 0.1,
            seed: 0,
        }
    }

    pub fn fused_dim(&self) -> usize {
        self.d_model + self.label_emb_dim
    }

    /// Width of one pair's input to the dense layer.
    pub fn pair_input_dim(&self) -> usize {
        2 * self.fused_dim() + self.relpos_emb_dim
    }

    pub fn check(&self) -> Result<()> {
        let positive = [
            ("vocab_size", self.vocab_size),
            ("d_model", self.d_model),
            ("encoder_layers", self.encoder_layers),
            ("encoder_heads", self.encoder_heads),
            ("ffn_dim", self.ffn_dim),
            ("label_count", self.label_count),
            ("label_emb_dim", self.label_emb_dim),
            ("fusion_heads", self.fusion_heads),
            ("relpos_emb_dim", self.relpos_emb_dim),
            ("hidden_dim", self.hidden_dim),
            ("max_rel_dist", self.max_rel_dist),
            ("max_seq_len", self.max_seq_len),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ModelError::InvalidConfig(format!("{name} must be > 0")));
            }
        }
        if !self.d_model.is_multiple_of(self.encoder_heads) {
            return Err(ModelError::InvalidConfig(format!(
                "d_model {} not divisible by encoder_heads {}",
                self.d_model, self.encoder_heads
            )));
        }
        if !self.fused_dim().is_multiple_of(self.fusion_heads) {
            return Err(ModelError::InvalidConfig(format!(
                "d_model + label_emb_dim = {} not divisible by fusion_heads {}",
                self.fused_dim(),
                self.fusion_heads
            )));
        }
        if self.num_classes < 2 {
            return Err(ModelError::InvalidConfig("num_classes must be >= 2".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::InvalidConfig(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }
}

/// Counts encoder forward passes. Clones start from the current count.
#[derive(Debug, Default)]
pub struct ForwardCounter(AtomicU64);

impl ForwardCounter {
    pub fn incr(&self) {
        self.0.fetch_add(1, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.0.store(0, Ordering::Relaxed);
    }
}

impl Clone for ForwardCounter {
    fn clone(&self) -> Self {
        ForwardCounter(AtomicU64::new(self.get()))
    }
}
