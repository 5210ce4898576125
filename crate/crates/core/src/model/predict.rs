use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BaselinePairModel, ModelConfig, ModelError, PairwiseREModel, Result, SegmentInput, Vocab};
use crate::corpus::{Document, Relation, SchemaProfile};
use crate::frames::{decode_frames, FrameSet};
use crate::numerics::{read_checkpoint, write_checkpoint, Checkpoint, ParamStore, Tape, Var};
use crate::windowing::{make_segments, RelationClasses, Segment, WindowConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Pairwise,
    Baseline,
}

/// Where the entity labels fed to the model come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LabelSource {
    Gold,
    Provided,
}

#[derive(Clone, Debug)]
enum Net {
    Pairwise(PairwiseREModel),
    Baseline(BaselinePairModel),
}

/// A network together with everything needed to run it on raw documents.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    net: Net,
    pub vocab: Vocab,
    pub classes: RelationClasses,
    pub schema: SchemaProfile,
    pub window: WindowConfig,
}

#[derive(Serialize, Deserialize)]
struct Echo {
    architecture: Architecture,
    model: ModelConfig,
    vocab: Vocab,
    classes: RelationClasses,
    schema: SchemaProfile,
    window: WindowConfig,
}

impl TrainedModel {
    pub fn new(
        arch: Architecture,
        config: ModelConfig,
        vocab: Vocab,
        classes: RelationClasses,
        schema: SchemaProfile,
        window: WindowConfig,
    ) -> Result<Self> {
        if config.vocab_size != vocab.len() {
            return Err(ModelError::InvalidConfig(format!(
                "vocab_size {} but vocabulary holds {} words",
                config.vocab_size,
                vocab.len()
            )));
        }
        if config.num_classes != classes.len() {
            return Err(ModelError::InvalidConfig(format!(
                "num_classes {} but {} relation classes",
                config.num_classes,
                classes.len()
            )));
        }
        if config.label_count != schema.label_count() {
            return Err(ModelError::InvalidConfig(format!(
                "label_count {} but schema has {} labels",
                config.label_count,
                schema.label_count()
            )));
        }
        let net = match arch {
            Architecture::Pairwise => Net::Pairwise(PairwiseREModel::new(config)?),
            Architecture::Baseline => Net::Baseline(BaselinePairModel::new(config)?),
        };
        Ok(TrainedModel {
            net,
            vocab,
            classes,
            schema,
            window,
        })
    }

    pub fn architecture(&self) -> Architecture {
        match self.net {
            Net::Pairwise(_) => Architecture::Pairwise,
            Net::Baseline(_) => Architecture::Baseline,
        }
    }

    pub fn config(&self) -> &ModelConfig {
        match &self.net {
            Net::Pairwise(m) => &m.config,
            Net::Baseline(m) => &m.config,
        }
    }

    pub fn store(&self) -> &ParamStore {
        match &self.net {
            Net::Pairwise(m) => &m.store,
            Net::Baseline(m) => &m.store,
        }
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        match &mut self.net {
            Net::Pairwise(m) => &mut m.store,
            Net::Baseline(m) => &mut m.store,
        }
    }

    pub fn pairwise(&self) -> Option<&PairwiseREModel> {
        match &self.net {
            Net::Pairwise(m) => Some(m),
            Net::Baseline(_) => None,
        }
    }

    /// Encoder forward passes since construction or the last reset.
    pub fn encoder_forwards(&self) -> u64 {
        match &self.net {
            Net::Pairwise(m) => m.forwards.get(),
            Net::Baseline(m) => m.forwards.get(),
        }
    }

    pub fn reset_forwards(&self) {
        match &self.net {
            Net::Pairwise(m) => m.forwards.reset(),
            Net::Baseline(m) => m.forwards.reset(),
        }
    }

    pub fn input(&self, seg: &Segment, relations: &[Relation]) -> Result<SegmentInput> {
        SegmentInput::with_targets(seg, &self.vocab, &self.schema, &self.classes, relations)
    }

    pub fn loss(&self, t: &mut Tape<'_>, input: &SegmentInput, null_weight: f64) -> Result<Var> {
        match &self.net {
            Net::Pairwise(m) => m.loss(t, input, null_weight),
            Net::Baseline(m) => m.loss(t, input, null_weight),
        }
    }

    pub fn pair_probs(&self, input: &SegmentInput) -> Result<Vec<Vec<f64>>> {
        match &self.net {
            Net::Pairwise(m) => m.pair_probs(input),
            Net::Baseline(m) => m.pair_probs(input),
        }
    }

    /// Checkpoint with the configuration, vocabulary, classes, schema and
    /// window echoed in the header. `extra` is stored under `"train"`.
    pub fn to_checkpoint(&self, extra: Option<serde_json::Value>) -> Checkpoint {
        let echo = Echo {
            architecture: self.architecture(),
            model: self.config().clone(),
            vocab: self.vocab.clone(),
            classes: self.classes.clone(),
            schema: self.schema.clone(),
            window: self.window,
        };
        let mut config = serde_json::to_value(echo).expect("echo serializes");
        if let Some(extra) = extra {
            config["train"] = extra;
        }
        Checkpoint::from_store(config, self.store())
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let mut header = ckpt.config.clone();
        if let Some(obj) = header.as_object_mut() {
            obj.remove("train");
        }
        let echo: Echo = serde_json::from_value(header).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        let mut model = TrainedModel::new(
            echo.architecture,
            echo.model,
            echo.vocab,
            echo.classes,
            echo.schema,
            echo.window,
        )?;
        ckpt.load_into(model.store_mut())?;
        Ok(model)
    }

    pub fn save(&self, path: &Path, extra: Option<serde_json::Value>) -> Result<()> {
        Ok(write_checkpoint(path, &self.to_checkpoint(extra))?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&read_checkpoint(path)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictedRelation {
    pub doc_id: String,
    pub rtype: String,
    pub source: String,
    pub target: String,
    pub prob: f64,
    pub window_index: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub doc_id: String,
    pub relations: Vec<PredictedRelation>,
    pub frames: FrameSet,
}

impl Prediction {
    /// Relations with fresh ids `R1..`.
    pub fn to_relations(&self) -> Vec<Relation> {
        numbered(&self.relations)
    }

    /// `doc` with its relations replaced by the predicted ones.
    pub fn apply(&self, doc: &Document) -> Document {
        Document {
            relations: self.to_relations(),
            ..doc.entities_only()
        }
    }
}

fn numbered(relations: &[PredictedRelation]) -> Vec<Relation> {
    relations
        .iter()
        .enumerate()
        .map(|(k, r)| Relation {
            id: format!("R{}", k + 1),
            rtype: r.rtype.clone(),
            source: r.source.clone(),
            target: r.target.clone(),
        })
        .collect()
}

/// Predicts relations between the entities of `doc` (its relations are
/// ignored). Each ordered head pair takes the argmax class; a pair seen in
/// several windows keeps the most probable non-null prediction, ties going to
/// the earlier window.
pub fn predict_document(model: &TrainedModel, doc: &Document) -> Result<Prediction> {
    let bare = doc.entities_only();
    let (segments, _) = make_segments(&bare, &model.window)?;
    let mut best: HashMap<(String, String), PredictedRelation> = HashMap::new();
    for seg in &segments {
        let input = SegmentInput::for_inference(seg, &model.vocab, &model.schema)?;
        let probs = model.pair_probs(&input)?;
        let m = seg.entities.len();
        let mut k = 0;
        for a in 0..m {
            for b in 0..m {
                if a == b {
                    continue;
                }
                let row = &probs[k];
                k += 1;
                let (class, &p) = row
                    .iter()
                    .enumerate()
                    .fold((0, &row[0]), |acc, (c, v)| if *v > *acc.1 { (c, v) } else { acc });
                if class == 0 {
                    continue;
                }
                let key = (seg.entities[a].id.clone(), seg.entities[b].id.clone());
                if best.get(&key).is_some_and(|prev| prev.prob >= p) {
                    continue;
                }
                best.insert(
                    key.clone(),
                    PredictedRelation {
                        doc_id: doc.doc_id.clone(),
                        rtype: model.classes.name(class).to_string(),
                        source: key.0,
                        target: key.1,
                        prob: p,
                        window_index: seg.window_index,
                    },
                );
            }
        }
    }
    let position: HashMap<&str, (usize, usize)> = doc
        .entities
        .iter()
        .map(|e| (e.id.as_str(), (e.start, e.end)))
        .collect();
    let mut relations: Vec<PredictedRelation> = best.into_values().collect();
    relations.sort_by(|x, y| {
        (position[x.source.as_str()], position[x.target.as_str()], &x.rtype).cmp(&(
            position[y.source.as_str()],
            position[y.target.as_str()],
            &y.rtype,
        ))
    });
    let frames = decode_frames(&doc.doc_id, &doc.entities, &numbered(&relations), &model.schema);
    Ok(Prediction {
        doc_id: doc.doc_id.clone(),
        relations,
        frames,
    })
}
