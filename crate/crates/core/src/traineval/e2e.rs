use serde::Serialize;

use super::{evaluate, frame_accuracy, predict_corpus, EvalReport, MatchMode, Result};
use crate::corpus::{CorpusError, Document};
use crate::model::{Prediction, TrainedModel};
use crate::par::Exec;

#[derive(Clone, Debug, Serialize)]
pub struct EndToEndReport {
    #[serde(skip)]
    pub predictions: Vec<Prediction>,
    pub strict: EvalReport,
    pub lenient: EvalReport,
    pub frame_accuracy: f64,
}

/// Relation extraction on externally recognised entities, scored against
/// gold in both matching modes. `provided` must hold one document per gold
/// document (same id); its relations are ignored.
pub fn end_to_end(model: &TrainedModel, provided: &[Document], gold: &[Document], exec: Exec) -> Result<EndToEndReport> {
    let missing: Vec<String> = gold
        .iter()
        .filter(|g| !provided.iter().any(|p| p.doc_id == g.doc_id))
        .map(|g| g.doc_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(CorpusError::MissingAnnotations(missing).into());
    }
    let predictions = predict_corpus(model, provided, exec)?;
    let predicted: Vec<Document> = provided
        .iter()
        .zip(&predictions)
        .map(|(d, p)| p.apply(d))
        .collect();
    let frames = frame_accuracy(gold, &predictions, &model.schema);
    Ok(EndToEndReport {
        strict: evaluate(gold, &predicted, MatchMode::Strict),
        lenient: evaluate(gold, &predicted, MatchMode::Lenient),
        frame_accuracy: frames,
        predictions,
    })
}

