use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::layers::{Encoder, Linear};
use super::pairwise::SegmentInput;
use super::{ForwardCounter, ModelConfig, ModelError, Result, MARKER_IDS};
use crate::numerics::{ParamStore, Tape, Tensor, Var};

/// Copies `ids` with `[E1]`/`[/E1]` around `source` and `[E2]`/`[/E2]` around
/// `target` (token spans, end exclusive). Returns the new sequence and the
/// positions of the four markers.
pub fn marked_sequence(
    ids: &[usize],
    source: (usize, usize),
    target: (usize, usize),
) -> Result<(Vec<usize>, [usize; 4])> {
    if source.0 < target.1 && target.0 < source.1 {
        return Err(ModelError::OverlappingMarkers(source, target));
    }
    for s in [source, target] {
        if s.0 >= s.1 || s.1 > ids.len() {
            return Err(ModelError::PairOutOfRange {
                index: s.1,
                len: ids.len(),
            });
        }
    }
    let mut out = Vec::with_capacity(ids.len() + 4);
    let mut pos = [0; 4];
    for k in 0..=ids.len() {
        // closing markers before opening ones at a shared boundary
        for (m, at) in [(1, source.1), (3, target.1), (0, source.0), (2, target.0)] {
            if at == k {
                pos[m] = out.len();
                out.push(MARKER_IDS[m]);
            }
        }
        if let Some(&id) = ids.get(k) {
            out.push(id);
        }
    }
    Ok((out, pos))
}

/// Sentence-duplication baseline: one encoder pass per candidate pair, mean
/// of the four marker outputs, linear classifier.
#[derive(Clone, Debug)]
pub struct BaselinePairModel {
    pub config: ModelConfig,
    pub store: ParamStore,
    pub encoder: Encoder,
    pub classifier: Linear,
    pub forwards: ForwardCounter,
}

impl BaselinePairModel {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let encoder = Encoder::new(&mut store, &mut rng, &config)?;
        let classifier = Linear::new(&mut store, &mut rng, "baseline.cls", config.d_model, config.num_classes)?;
        Ok(BaselinePairModel {
            config,
            store,
            encoder,
            classifier,
            forwards: ForwardCounter::default(),
        })
    }

    /// Logits `[1, num_classes]` for one ordered entity pair.
    pub fn baseline_forward(
        &self,
        t: &mut Tape<'_>,
        ids: &[usize],
        source: (usize, usize),
        target: (usize, usize),
    ) -> Result<Var> {
        let (seq, pos) = marked_sequence(ids, source, target)?;
        self.forwards.incr();
        let h = self.encoder.forward(t, &seq)?;
        let markers = t.gather_rows(h, &pos)?;
        let avg = t.constant(Tensor::filled(&[1, 4], 0.25));
        let pooled = t.matmul(avg, markers)?;
        self.classifier.forward(t, pooled)
    }

    /// Logits `[m(m−1), num_classes]` for every ordered pair of the segment,
    /// in the same order as [`SegmentInput::pairs`].
    pub fn forward(&self, t: &mut Tape<'_>, input: &SegmentInput) -> Result<Var> {
        let m = input.spans.len();
        let mut rows = Vec::with_capacity(m * m.saturating_sub(1));
        for a in 0..m {
            for b in 0..m {
                if a != b {
                    rows.push(self.baseline_forward(t, &input.token_ids, input.spans[a], input.spans[b])?);
                }
            }
        }
        if rows.is_empty() {
            return Ok(t.constant(Tensor::zeros(&[0, self.config.num_classes])));
        }
        Ok(t.concat_rows(&rows)?)
    }

    pub fn loss(&self, t: &mut Tape<'_>, input: &SegmentInput, null_weight: f64) -> Result<Var> {
        if input.targets.is_empty() {
            return Err(ModelError::EmptyTargets);
        }
        let logits = self.forward(t, input)?;
        let w: Vec<f64> = input
            .targets
            .iter()
            .map(|&c| if c == 0 { null_weight } else { 1.0 })
            .collect();
        Ok(t.cross_entropy(logits, &input.targets, Some(&w))?)
    }

    pub fn pair_probs(&self, input: &SegmentInput) -> Result<Vec<Vec<f64>>> {
        let mut t = Tape::new(&self.store);
        let logits = self.forward(&mut t, input)?;
        if input.spans.len() < 2 {
            return Ok(Vec::new());
        }
        let p = t.row_softmax(logits)?;
        let k = self.config.num_classes;
        Ok(t.value(p).data().chunks(k).map(<[f64]>::to_vec).collect())
    }
}
