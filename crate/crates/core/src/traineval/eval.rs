use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::Result;
use crate::corpus::{Document, Entity, Relation, SchemaProfile, SAME_FRAME};
use crate::frames::{build_frames, FrameSet};
use crate::model::{predict_document, Prediction, TrainedModel};
use crate::par::{self, Exec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Identical offsets and entity type.
    Strict,
    /// Any character overlap and identical entity type.
    Lenient,
}

impl MatchMode {
    fn entities_match(self, a: &Entity, b: &Entity) -> bool {
        a.etype == b.etype
            && match self {
                MatchMode::Strict => a.start == b.start && a.end == b.end,
                MatchMode::Lenient => a.start < b.end && b.start < a.end,
            }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PrfRow {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// No predictions: precision is reported as 0.
    pub precision_undefined: bool,
}

impl PrfRow {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let undefined = tp + fp == 0;
        let precision = if undefined { 0.0 } else { tp as f64 / (tp + fp) as f64 };
        let recall = if tp + fn_ == 0 { 0.0 } else { tp as f64 / (tp + fn_) as f64 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        PrfRow {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
            precision_undefined: undefined,
        }
    }

    /// Gold relations of this row.
    pub fn support(&self) -> usize {
        self.tp + self.fn_
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: MatchMode,
    pub per_type: BTreeMap<String, PrfRow>,
    pub micro: PrfRow,
    pub excluded_types: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_minutes: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forwards: Option<u64>,
}

impl EvalReport {
    pub fn table(&self) -> String {
        let mode = match self.mode {
            MatchMode::Strict => "strict",
            MatchMode::Lenient => "lenient",
        };
        let mut out = format!("matching: {mode}\n");
        let width = self.per_type.keys().map(String::len).max().unwrap_or(5).max(5);
        let _ = writeln!(
            out,
            "{:<width$}  {:>9}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}  {:>6}",
            "type", "precision", "recall", "f1", "tp", "fp", "fn", "gold"
        );
        let mut line = |name: &str, r: &PrfRow| {
            let mark = if r.precision_undefined { "*" } else { " " };
            let _ = writeln!(
                out,
                "{:<width$}  {:>8.4}{mark}  {:>6.4}  {:>6.4}  {:>6}  {:>6}  {:>6}  {:>6}",
                name,
                r.precision,
                r.recall,
                r.f1,
                r.tp,
                r.fp,
                r.fn_,
                r.support()
            );
        };
        for (name, r) in &self.per_type {
            line(name, r);
        }
        line("micro", &self.micro);
        if self.per_type.values().any(|r| r.precision_undefined) || self.micro.precision_undefined {
            out.push_str("* no predictions of this type; precision reported as 0\n");
        }
        if !self.excluded_types.is_empty() {
            let _ = writeln!(out, "excluded from scoring: {}", self.excluded_types.join(", "));
        }
        if let Some(m) = self.train_minutes {
            let _ = writeln!(out, "train minutes: {m:.3}");
        }
        if let Some(f) = self.forwards {
            let _ = writeln!(out, "encoder forwards: {f}");
        }
        out
    }
}

/// Size of a maximum matching in a bipartite graph given as adjacency lists
/// from left to right vertices.
fn max_matching(adj: &[Vec<usize>], right: usize) -> usize {
    fn augment(u: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &v in &adj[u] {
            if seen[v] {
                continue;
            }
            seen[v] = true;
            if owner[v].is_none_or(|w| augment(w, adj, seen, owner)) {
                owner[v] = Some(u);
                return true;
            }
        }
        false
    }
    let mut owner = vec![None; right];
    let mut total = 0;
    for u in 0..adj.len() {
        let mut seen = vec![false; right];
        if augment(u, adj, &mut seen, &mut owner) {
            total += 1;
        }
    }
    total
}

type Counts = BTreeMap<String, (usize, usize, usize)>;

fn doc_counts(gold: Option<&Document>, pred: Option<&Document>, mode: MatchMode, excluded: &[&str], out: &mut Counts) {
    let scored = |d: Option<&Document>| -> Vec<Relation> {
        d.map(|d| {
            d.relations
                .iter()
                .filter(|r| !excluded.contains(&r.rtype.as_str()))
                .cloned()
                .collect()
        })
        .unwrap_or_default()
    };
    let g_rel = scored(gold);
    let p_rel = scored(pred);
    let g_ent: HashMap<&str, &Entity> = gold
        .map(|d| d.entities.iter().map(|e| (e.id.as_str(), e)).collect())
        .unwrap_or_default();
    let p_ent: HashMap<&str, &Entity> = pred
        .map(|d| d.entities.iter().map(|e| (e.id.as_str(), e)).collect())
        .unwrap_or_default();

    let mut by_type: BTreeMap<&str, (Vec<&Relation>, Vec<&Relation>)> = BTreeMap::new();
    for r in &g_rel {
        by_type.entry(r.rtype.as_str()).or_default().0.push(r);
    }
    for r in &p_rel {
        by_type.entry(r.rtype.as_str()).or_default().1.push(r);
    }
    for (rtype, (gs, ps)) in by_type {
        let ends_match = |p: &str, g: &str| match (p_ent.get(p), g_ent.get(g)) {
            (Some(a), Some(b)) => mode.entities_match(a, b),
            _ => false,
        };
        let adj: Vec<Vec<usize>> = ps
            .iter()
            .map(|p| {
                (0..gs.len())
                    .filter(|&k| ends_match(&p.source, &gs[k].source) && ends_match(&p.target, &gs[k].target))
                    .collect()
            })
            .collect();
        let tp = max_matching(&adj, gs.len());
        let c = out.entry(rtype.to_string()).or_default();
        c.0 += tp;
        c.1 += ps.len() - tp;
        c.2 += gs.len() - tp;
    }
}

/// Scores predicted relations against gold, document by document (paired by
/// id). Each gold relation is matched at most once, per relation type, via a
/// maximum bipartite matching. `SAME_FRAME` edges are not scored.
pub fn evaluate(gold: &[Document], predicted: &[Document], mode: MatchMode) -> EvalReport {
    let excluded = [SAME_FRAME];
    let pred_by_id: HashMap<&str, &Document> = predicted.iter().map(|d| (d.doc_id.as_str(), d)).collect();
    let gold_ids: HashMap<&str, ()> = gold.iter().map(|d| (d.doc_id.as_str(), ())).collect();
    let mut counts = Counts::new();
    for g in gold {
        doc_counts(Some(g), pred_by_id.get(g.doc_id.as_str()).copied(), mode, &excluded, &mut counts);
    }
    for p in predicted.iter().filter(|p| !gold_ids.contains_key(p.doc_id.as_str())) {
        doc_counts(None, Some(p), mode, &excluded, &mut counts);
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    let per_type = counts
        .into_iter()
        .map(|(t, (a, b, c))| {
            tp += a;
            fp += b;
            fn_ += c;
            (t, PrfRow::from_counts(a, b, c))
        })
        .collect();
    EvalReport {
        mode,
        per_type,
        micro: PrfRow::from_counts(tp, fp, fn_),
        excluded_types: excluded.iter().map(|s| s.to_string()).collect(),
        train_minutes: None,
        forwards: None,
    }
}

/// Runs the model over every document, preserving order.
pub fn predict_corpus(model: &TrainedModel, docs: &[Document], exec: Exec) -> Result<Vec<Prediction>> {
    par::map(exec, docs, |d| predict_document(model, d))
        .into_iter()
        .map(|r| r.map_err(Into::into))
        .collect()
}

type FrameKey = ((usize, usize, String), Vec<(usize, usize, String, String)>);

fn frame_keys(fs: &FrameSet, entities: &[Entity]) -> Vec<FrameKey> {
    let by_id: HashMap<&str, &Entity> = entities.iter().map(|e| (e.id.as_str(), e)).collect();
    let span = |id: &str| {
        by_id
            .get(id)
            .map_or((usize::MAX, usize::MAX, id.to_string()), |e| (e.start, e.end, e.etype.clone()))
    };
    let mut keys: Vec<FrameKey> = fs
        .frames
        .iter()
        .map(|f| {
            let mut links: Vec<_> = f
                .links
                .iter()
                .map(|l| {
                    let (s, e, t) = span(&l.attribute);
                    (s, e, t, l.rtype.clone())
                })
                .collect();
            links.sort();
            links.dedup();
            (span(&f.drug), links)
        })
        .collect();
    keys.sort();
    keys
}

/// `(matched, gold, predicted)` frame counts under exact matching of drug
/// and link set (by offsets, entity type and relation type).
pub fn frame_match_counts(
    gold: &FrameSet,
    gold_entities: &[Entity],
    pred: &FrameSet,
    pred_entities: &[Entity],
) -> (usize, usize, usize) {
    let g = frame_keys(gold, gold_entities);
    let p = frame_keys(pred, pred_entities);
    let mut matched = 0;
    let (mut i, mut j) = (0, 0);
    while i < g.len() && j < p.len() {
        match g[i].cmp(&p[j]) {
            std::cmp::Ordering::Equal => {
                matched += 1;
                i += 1;
                j += 1;
            }
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
        }
    }
    (matched, g.len(), p.len())
}

/// Frame-level exact-match accuracy `matched / (gold + predicted − matched)`
/// pooled over documents; 1 when both sides are empty.
pub fn frame_accuracy(gold: &[Document], predictions: &[Prediction], schema: &SchemaProfile) -> f64 {
    let by_id: HashMap<&str, &Prediction> = predictions.iter().map(|p| (p.doc_id.as_str(), p)).collect();
    let (mut m, mut g, mut p) = (0, 0, 0);
    for d in gold {
        let gf = build_frames(d, schema);
        let (a, b, c) = match by_id.get(d.doc_id.as_str()) {
            Some(pred) => frame_match_counts(&gf, &d.entities, &pred.frames, &d.entities),
            None => (0, gf.frames.len(), 0),
        };
        m += a;
        g += b;
        p += c;
    }
    let denom = g + p - m;
    if denom == 0 {
        1.0
    } else {
        m as f64 / denom as f64
    }
}
