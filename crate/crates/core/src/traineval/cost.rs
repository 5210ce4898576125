use serde::{Deserialize, Serialize};

use super::{prepare_documents, train, Result, TrainConfig};
use crate::corpus::{Document, SchemaProfile};
use crate::model::Architecture;
use crate::windowing::make_segments;

/// Encoder passes and wall-clock time of both architectures over the same
/// segments and epoch budget.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub segments: usize,
    pub epochs: usize,
    /// Segments per epoch.
    pub pairwise_forwards: u64,
    /// Ordered candidate pairs per epoch, `Σ m(m−1)`.
    pub baseline_forwards: u64,
    pub analytic_ratio: f64,
    /// Counted encoder passes over the whole budget.
    pub pairwise_counted: u64,
    pub baseline_counted: u64,
    pub pairwise_seconds: f64,
    pub baseline_seconds: f64,
    pub measured_ratio: f64,
}

impl CostReport {
    pub fn counters_match(&self) -> bool {
        self.pairwise_counted == self.pairwise_forwards * self.epochs as u64
            && self.baseline_counted == self.baseline_forwards * self.epochs as u64
    }

    pub fn table(&self) -> String {
        format!(
            "segments: {}\nepochs: {}\n\
             {:<10} {:>16} {:>16} {:>12}\n\
             {:<10} {:>16} {:>16} {:>12.3}\n\
             {:<10} {:>16} {:>16} {:>12.3}\n\
             ratio (baseline / pairwise): analytic {:.3}, measured {:.3}\n",
            self.segments,
            self.epochs,
            "model",
            "forwards/epoch",
            "counted",
            "seconds",
            "pairwise",
            self.pairwise_forwards,
            self.pairwise_counted,
            self.pairwise_seconds,
            "baseline",
            self.baseline_forwards,
            self.baseline_counted,
            self.baseline_seconds,
            self.analytic_ratio,
            self.measured_ratio,
        )
    }
}

/// Trains both architectures with `cfg` (its architecture field is ignored)
/// and compares counted passes and time against `S` and `Σ m(m−1)`.
pub fn cost_report(docs: &[Document], schema: &SchemaProfile, cfg: &TrainConfig) -> Result<CostReport> {
    cfg.check()?;
    let prepared = prepare_documents(docs, schema, cfg.frame_augmentation);
    let (mut segments, mut pairs) = (0u64, 0u64);
    for d in &prepared {
        for s in make_segments(d, &cfg.window())?.0 {
            segments += 1;
            pairs += s.pair_count() as u64;
        }
    }
    let run = |arch| {
        let c = TrainConfig {
            architecture: arch,
            ..cfg.clone()
        };
        train(docs, schema, &c)
    };
    let pw = run(Architecture::Pairwise)?;
    let bl = run(Architecture::Baseline)?;
    let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
    Ok(CostReport {
        segments: segments as usize,
        epochs: cfg.epochs,
        pairwise_forwards: segments,
        baseline_forwards: pairs,
        analytic_ratio: ratio(pairs as f64, segments as f64),
        pairwise_counted: pw.log.total_forwards,
        baseline_counted: bl.log.total_forwards,
        pairwise_seconds: pw.log.wall_seconds,
        baseline_seconds: bl.log.wall_seconds,
        measured_ratio: ratio(bl.log.wall_seconds, pw.log.wall_seconds),
    })
}
