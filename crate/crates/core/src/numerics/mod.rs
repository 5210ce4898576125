//! Dense f64 tensors with reverse-mode differentiation.
//!
//! A [`Tape`] records operations on 2-D values during a forward pass and
//! replays them backwards from a scalar loss. Parameters live in a
//! [`ParamStore`] that also carries the Adam moment buffers.

mod checkpoint;
mod gemm;
mod gradcheck;
mod params;
mod schedule;
mod tape;
mod tensor;

use thiserror::Error;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use gradcheck::{finite_diff_check, GradCheckOptions, GradCheckReport};
pub use params::{AdamConfig, Gradients, Param, ParamId, ParamStore};
pub use schedule::LrSchedule;
pub use tape::{Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("{op}: incompatible shapes {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: index {index} out of range for size {bound}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("{op}: non-finite value produced")]
    NonFinite { op: &'static str },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("graph already consumed by a previous backward pass")]
    GraphConsumed,
    #[error("optimizer step without accumulated gradients")]
    EmptyGradients,
    #[error("duplicate parameter name {0:?}")]
    DuplicateParam(String),
    #[error("unknown parameter {0:?}")]
    UnknownParam(String),
    #[error("schedule step {step} outside 0..={total}")]
    StepOutOfRange { step: usize, total: usize },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("{0}")]
    InvalidArgument(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = NumericsError> = std::result::Result<T, E>;
