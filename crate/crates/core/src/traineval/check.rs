use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ModelSpec, Result};
use crate::corpus::SchemaProfile;
use crate::model::{ModelError, PairwiseREModel, SegmentInput};
use crate::numerics::{finite_diff_check, GradCheckOptions, GradCheckReport, NumericsError, Tape};
use crate::windowing::RelationClasses;

/// Random segment on which the full pairwise loss is checked.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GradCheckSetup {
    pub seq_len: usize,
    pub entities: usize,
    pub vocab_size: usize,
    pub seed: u64,
    pub model: ModelSpec,
}

impl Default for GradCheckSetup {
    fn default() -> Self {
        GradCheckSetup {
            seq_len: 24,
            entities: 4,
            vocab_size: 50,
            seed: 0,
            model: ModelSpec {
                dropout: 0.0,
                max_seq_len: 24,
                ..ModelSpec::default()
            },
        }
    }
}

/// Builds a randomly initialised pairwise model (dropout forced off) and a
/// random segment, then compares analytic and central-difference gradients
/// of the masked loss.
pub fn model_grad_check(setup: &GradCheckSetup, opts: &GradCheckOptions) -> Result<GradCheckReport> {
    let schema = SchemaProfile::corp_hus();
    let classes = RelationClasses::new(&schema, true);
    let spec = ModelSpec {
        dropout: 0.0,
        ..setup.model.clone()
    };
    let cfg = spec.to_config(setup.vocab_size, schema.label_count(), classes.len(), setup.seed);
    let model = PairwiseREModel::new(cfg)?;

    let mut rng = ChaCha8Rng::seed_from_u64(setup.seed ^ 0x5EED);
    let n = setup.seq_len.max(setup.entities).max(1);
    let m = setup.entities.min(n);
    let token_ids: Vec<usize> = (0..n).map(|_| rng.random_range(6..setup.vocab_size.max(7))).collect();
    let mut heads: Vec<usize> = rand::seq::index::sample(&mut rng, n, m).into_vec();
    heads.sort_unstable();
    let mut labels = vec![0; n];
    for &h in &heads {
        labels[h] = rng.random_range(1..schema.label_count());
    }
    let mut pairs = Vec::new();
    let mut targets = Vec::new();
    for &i in &heads {
        for &j in &heads {
            if i != j {
                pairs.push((i, j));
                targets.push(rng.random_range(0..classes.len()));
            }
        }
    }
    let input = SegmentInput {
        token_ids,
        labels,
        pairs,
        targets,
        spans: heads.iter().map(|&h| (h, h + 1)).collect(),
    };
    let loss = |t: &mut Tape<'_>| model.loss(t, &input, 1.0).map_err(as_numerics);
    Ok(finite_diff_check(&model.store, loss, opts)?)
}

fn as_numerics(e: ModelError) -> NumericsError {
    match e {
        ModelError::Numerics(n) => n,
        other => NumericsError::InvalidArgument(other.to_string()),
    }
}
