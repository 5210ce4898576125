//! Simultaneous pairwise relation extraction for medication information.
//!
//! The crate is organised as a pipeline:
//!
//! * [`corpus`] loads and validates standoff-annotated documents.
//! * [`frames`] groups drug attributes into regimen frames and synthesizes
//!   `SAME_FRAME` augmentation edges.
//! * [`windowing`] tokenizes, cuts sliding character windows and builds the
//!   ordered entity-pair targets.
//! * [`numerics`] is a small f64 tensor engine with reverse-mode gradients,
//!   Adam and a warmup/decay schedule.
//! * [`model`] holds the pairwise classifier and the per-pair marker baseline.
//! * [`traineval`] trains, scores and compares both architectures.
//! * [`synthgen`] produces deterministic gold corpora for every stage.
//!
//! Data-parallel loops (document batches, gradient checks, evaluation) go
//! through [`par`], which uses rayon when the `parallel` feature is enabled
//! and falls back to plain iterators otherwise.

pub mod corpus;
pub mod frames;
pub mod model;
pub mod numerics;
pub mod par;
pub mod synthgen;
pub mod traineval;
pub mod windowing;

pub use corpus::{Document, Entity, Relation, SchemaProfile};
pub use frames::{Frame, FrameSet};
