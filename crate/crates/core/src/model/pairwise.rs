use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{normal, Encoder, LayerNorm, Linear, MultiHeadAttention};
use super::{ForwardCounter, ModelConfig, ModelError, Result, Vocab};
use crate::corpus::{Relation, SchemaProfile};
use crate::numerics::{ParamId, ParamStore, Tape, Tensor, Var};
use crate::windowing::{align_labels, build_pair_targets, RelationClasses, Segment};

/// Model-ready view of one segment.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentInput {
    pub token_ids: Vec<usize>,
    pub labels: Vec<usize>,
    /// Ordered entity-head token pairs, source-major.
    pub pairs: Vec<(usize, usize)>,
    /// Class id per pair; empty at inference time.
    pub targets: Vec<usize>,
    /// Token spans of the entities, in segment order.
    pub spans: Vec<(usize, usize)>,
}

impl SegmentInput {
    /// Inputs with gold pair targets drawn from `relations`.
    pub fn with_targets(
        seg: &Segment,
        vocab: &Vocab,
        schema: &SchemaProfile,
        classes: &RelationClasses,
        relations: &[Relation],
    ) -> Result<Self> {
        let targets = build_pair_targets(seg, relations, classes)?;
        Ok(SegmentInput {
            token_ids: vocab.encode(&seg.tokens),
            labels: align_labels(seg, schema)?,
            pairs: targets.iter().map(|p| (p.i, p.j)).collect(),
            targets: targets.iter().map(|p| p.class_id).collect(),
            spans: seg.spans.clone(),
        })
    }

    /// Inputs without targets, pairs in the same source-major order.
    pub fn for_inference(seg: &Segment, vocab: &Vocab, schema: &SchemaProfile) -> Result<Self> {
        let heads = seg.heads();
        let mut pairs = Vec::with_capacity(seg.pair_count());
        for (a, &i) in heads.iter().enumerate() {
            for (b, &j) in heads.iter().enumerate() {
                if a != b {
                    pairs.push((i, j));
                }
            }
        }
        Ok(SegmentInput {
            token_ids: vocab.encode(&seg.tokens),
            labels: align_labels(seg, schema)?,
            pairs,
            targets: Vec::new(),
            spans: seg.spans.clone(),
        })
    }
}

/// Encoder, label fusion attention and the batched relative-position pair head.
#[derive(Clone, Debug)]
pub struct PairwiseREModel {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub encoder: Encoder,
    pub label_emb: ParamId,
    pub fusion: MultiHeadAttention,
    pub fusion_ln: LayerNorm,
    pub relpos: ParamId,
    pub dense: Linear,
    pub classifier: Linear,
    pub forwards: ForwardCounter,
}

impl PairwiseREModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let encoder = Encoder::new(&mut store, &mut rng, &config)?;
        let fused = config.fused_dim();
        let label_emb = store.add(
            "label_emb",
            normal(&mut rng, &[config.label_count, config.label_emb_dim], 0.1),
        )?;
        let fusion = MultiHeadAttention::new(&mut store, &mut rng, "fusion.attn", fused, config.fusion_heads)?;
        let fusion_ln = LayerNorm::new(&mut store, "fusion.ln", fused)?;
        let relpos = store.add(
            "relpos_emb",
            normal(&mut rng, &[2 * config.max_rel_dist + 1, config.relpos_emb_dim], 0.1),
        )?;
        let dense = Linear::new(&mut store, &mut rng, "head.dense", config.pair_input_dim(), config.hidden_dim)?;
        let classifier = Linear::new(&mut store, &mut rng, "head.cls", config.hidden_dim, config.num_classes)?;
        Ok(PairwiseREModel {
            config,
            store,
            encoder,
            label_emb,
            fusion,
            fusion_ln,
            relpos,
            dense,
            classifier,
            forwards: ForwardCounter::default(),
        })
    }

    /// Contextual embeddings `[seq, d_model]`; one counted encoder pass.
    pub fn encode_tokens(&self, t: &mut Tape<'_>, ids: &[usize]) -> Result<Var> {
        self.forwards.incr();
        self.encoder.forward(t, ids)
    }

    /// Concatenates label embeddings and applies one residual attention block:
    /// `[seq, d_model + label_emb_dim]`.
    pub fn fuse_and_attend(&self, t: &mut Tape<'_>, contextual: Var, labels: &[usize]) -> Result<Var> {
        let seq = t.value(contextual).rows();
        if labels.len() != seq {
            return Err(ModelError::LabelLengthMismatch {
                tokens: seq,
                labels: labels.len(),
            });
        }
        if let Some(&id) = labels.iter().find(|&&l| l >= self.config.label_count) {
            return Err(ModelError::UnknownLabelId {
                id,
                size: self.config.label_count,
            });
        }
        let lab = t.embedding(self.label_emb, labels)?;
        let z = t.concat_cols(&[contextual, lab])?;
        let a = self.fusion.forward(t, z, self.config.dropout)?;
        let a = t.dropout(a, self.config.dropout)?;
        let z = t.add(z, a)?;
        self.fusion_ln.forward(t, z)
    }

    /// Relative-position table row for an ordered head pair.
    pub fn relpos_index(&self, i: usize, j: usize) -> usize {
        let r = self.config.max_rel_dist as i64;
        ((j as i64 - i as i64).clamp(-r, r) + r) as usize
    }

    /// Logits `[|pairs|, num_classes]` from one batched pass over all pairs.
    pub fn pair_logits(&self, t: &mut Tape<'_>, fused: Var, pairs: &[(usize, usize)]) -> Result<Var> {
        let seq = t.value(fused).rows();
        for &(i, j) in pairs {
            if i == j {
                return Err(ModelError::SelfPair(i));
            }
            if i.max(j) >= seq {
                return Err(ModelError::PairOutOfRange {
                    index: i.max(j),
                    len: seq,
                });
            }
        }
        if pairs.is_empty() {
            return Ok(t.constant(Tensor::zeros(&[0, self.config.num_classes])));
        }
        let left: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let right: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let rel: Vec<usize> = pairs.iter().map(|&(i, j)| self.relpos_index(i, j)).collect();
        let ui = t.gather_rows(fused, &left)?;
        let uj = t.gather_rows(fused, &right)?;
        let rp = t.embedding(self.relpos, &rel)?;
        let x = t.concat_cols(&[ui, uj, rp])?;
        let h = self.dense.forward(t, x)?;
        let h = t.gelu(h)?;
        let h = t.dropout(h, self.config.dropout)?;
        self.classifier.forward(t, h)
    }

    /// Mean cross-entropy over the materialized pairs, with class-0 rows
    /// weighted by `null_weight`.
    pub fn masked_loss(&self, t: &mut Tape<'_>, logits: Var, targets: &[usize], null_weight: f64) -> Result<Var> {
        if targets.is_empty() {
            return Err(ModelError::EmptyTargets);
        }
        if null_weight == 1.0 {
            return Ok(t.cross_entropy(logits, targets, None)?);
        }
        let w: Vec<f64> = targets.iter().map(|&c| if c == 0 { null_weight } else { 1.0 }).collect();
        Ok(t.cross_entropy(logits, targets, Some(&w))?)
    }

    pub fn forward(&self, t: &mut Tape<'_>, input: &SegmentInput) -> Result<Var> {
        let h = self.encode_tokens(t, &input.token_ids)?;
        let fused = self.fuse_and_attend(t, h, &input.labels)?;
        self.pair_logits(t, fused, &input.pairs)
    }

    pub fn loss(&self, t: &mut Tape<'_>, input: &SegmentInput, null_weight: f64) -> Result<Var> {
        let logits = self.forward(t, input)?;
        self.masked_loss(t, logits, &input.targets, null_weight)
    }

    /// Class probabilities per pair in evaluation mode.
    pub fn pair_probs(&self, input: &SegmentInput) -> Result<Vec<Vec<f64>>> {
        let mut t = Tape::new(&self.store);
        let logits = self.forward(&mut t, input)?;
        let k = self.config.num_classes;
        if input.pairs.is_empty() {
            return Ok(Vec::new());
        }
        let p = t.row_softmax(logits)?;
        Ok(t.value(p).data().chunks(k).map(<[f64]>::to_vec).collect())
    }
}
