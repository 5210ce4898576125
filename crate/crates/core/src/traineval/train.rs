use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Result, TrainConfig, TrainError};
use crate::corpus::{Document, SchemaProfile, SAME_FRAME};
use crate::frames::{build_frames, with_frame_relations};
use crate::model::{SegmentInput, TrainedModel, Vocab};
use crate::numerics::{AdamConfig, LrSchedule, Tape};
use crate::windowing::{make_segments, tokenize, RelationClasses, WindowReport};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub epoch: usize,
    pub step: usize,
    pub lr: f64,
    /// Mean segment loss over the batch.
    pub loss: f64,
    /// Cumulative encoder forward passes.
    pub forwards: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mean_loss: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RunLog {
    pub steps: Vec<StepLog>,
    pub epochs: Vec<EpochLog>,
    pub segments: usize,
    pub total_forwards: u64,
    pub wall_seconds: f64,
    pub windows: WindowReport,
}

impl RunLog {
    /// One JSON object per optimizer step.
    pub fn to_jsonl(&self) -> String {
        self.steps
            .iter()
            .map(|s| serde_json::to_string(s).expect("step serializes") + "\n")
            .collect()
    }
}

pub struct TrainOutcome {
    pub model: TrainedModel,
    pub log: RunLog,
}

/// Training view of the corpus: with frame augmentation every frame's
/// attribute pairs carry `SAME_FRAME` edges; without it those edges are
/// removed.
pub fn prepare_documents(docs: &[Document], schema: &SchemaProfile, frame_augmentation: bool) -> Vec<Document> {
    docs.iter()
        .map(|d| {
            if frame_augmentation {
                with_frame_relations(d, &build_frames(d, schema), schema)
            } else {
                d.without_relation_type(SAME_FRAME)
            }
        })
        .collect()
}

/// Seed of the dropout stream for one segment visit.
fn dropout_seed(seed: u64, step: usize, slot: usize) -> u64 {
    seed ^ ((step as u64) << 20).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (slot as u64).wrapping_mul(0xBF58_476D_1CE4_E5B9)
}

/// Mini-batch Adam training on one thread. Identical inputs and seed give
/// bit-identical weights.
pub fn train(docs: &[Document], schema: &SchemaProfile, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.check()?;
    let started = Instant::now();
    let docs = prepare_documents(docs, schema, cfg.frame_augmentation);
    let window = cfg.window();

    let tokens: Vec<_> = docs.iter().flat_map(|d| tokenize(&d.text)).collect();
    let vocab = Vocab::build(&tokens);
    let classes = RelationClasses::new(schema, cfg.frame_augmentation);
    let model_cfg = cfg
        .model
        .to_config(vocab.len(), schema.label_count(), classes.len(), cfg.seed);
    let mut model = TrainedModel::new(cfg.architecture, model_cfg, vocab, classes, schema.clone(), window)?;

    let mut windows = WindowReport::default();
    let mut inputs: Vec<SegmentInput> = Vec::new();
    for d in &docs {
        let (segments, report) = make_segments(d, &window)?;
        windows.merge(&report);
        for s in &segments {
            inputs.push(model.input(s, &d.relations)?);
        }
    }
    if inputs.is_empty() {
        return Err(TrainError::NoSegments);
    }

    let per_epoch = inputs.len().div_ceil(cfg.batch_size);
    let total = per_epoch * cfg.epochs;
    let schedule = LrSchedule::with_warmup_fraction(cfg.peak_lr, total + 1, cfg.warmup_fraction)?;
    let adam = AdamConfig::default();
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut log = RunLog {
        segments: inputs.len(),
        windows,
        ..RunLog::default()
    };
    model.reset_forwards();
    let mut step = 0;
    for epoch in 1..=cfg.epochs {
        let epoch_start = Instant::now();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            step += 1;
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            for (slot, &k) in batch.iter().enumerate() {
                let grads = {
                    let mut tape = Tape::training(model.store(), dropout_seed(cfg.seed, step, slot));
                    let loss = model.loss(&mut tape, &inputs[k], cfg.null_weight)?;
                    batch_loss += tape.value(loss).item();
                    let scaled = tape.scale(loss, scale)?;
                    tape.backward(scaled)?
                };
                model.store_mut().accumulate(&grads);
            }
            let lr = schedule.lr_at(step)?;
            model.store_mut().adam_step(lr, &adam)?;
            let loss = batch_loss * scale;
            epoch_loss += batch_loss;
            log.steps.push(StepLog {
                epoch,
                step,
                lr,
                loss,
                forwards: model.encoder_forwards(),
            });
        }
        log.epochs.push(EpochLog {
            epoch,
            mean_loss: epoch_loss / inputs.len() as f64,
            seconds: epoch_start.elapsed().as_secs_f64(),
        });
    }
    log.total_forwards = model.encoder_forwards();
    log.wall_seconds = started.elapsed().as_secs_f64();
    Ok(TrainOutcome { model, log })
}
