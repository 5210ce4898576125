use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IndexedRandom;
use rand::Rng;
use regimen::corpus::{Document, Entity, Relation, SAME_FRAME};
use regimen::traineval::{EvalReport, PrfRow};

/// Largest accepted difference between a reported and a recomputed score.
pub const SCORE_TOLERANCE: f64 = 1e-12;

const ENTITY_TYPES: [&str; 3] = ["Drug", "Date", "Route"];
const RELATION_TYPES: [&str; 3] = ["Start", "Refer_to", "Stop"];

/// Per relation type: (tp, fp, fn).
pub type Counts = BTreeMap<String, (usize, usize, usize)>;

fn entity(id: String, etype: &str, start: usize, end: usize) -> Entity {
    Entity {
        id,
        etype: etype.to_string(),
        start,
        end,
        surface: String::new(),
    }
}

fn relation(k: usize, rtype: &str, source: &str, target: &str) -> Relation {
    Relation {
        id: format!("R{k}"),
        rtype: rtype.to_string(),
        source: source.to_string(),
        target: target.to_string(),
    }
}

fn random_relations<R: Rng>(rng: &mut R, ents: &[Entity], count: usize, out: &mut Vec<Relation>) {
    if ents.len() < 2 {
        return;
    }
    for _ in 0..count {
        let s = rng.random_range(0..ents.len());
        let mut t = rng.random_range(0..ents.len() - 1);
        if t >= s {
            t += 1;
        }
        let rtype = if rng.random_bool(0.1) { SAME_FRAME } else { *RELATION_TYPES.choose(rng).unwrap() };
        out.push(relation(out.len() + 1, rtype, &ents[s].id, &ents[t].id));
    }
}

fn random_gold<R: Rng>(rng: &mut R, doc_id: String) -> Document {
    let mut d = Document::new(doc_id, "x".repeat(64));
    for k in 0..rng.random_range(1..=5) {
        let start = rng.random_range(0..40);
        let end = start + rng.random_range(1..6);
        d.entities.push(entity(format!("G{k}"), ENTITY_TYPES.choose(rng).unwrap(), start, end));
    }
    let n = rng.random_range(0..=5);
    random_relations(rng, &d.entities.clone(), n, &mut d.relations);
    d
}

/// Noisy copy of a gold document: jittered spans, retyped entities,
/// dropped, duplicated and spurious relations.
fn noisy_prediction<R: Rng>(rng: &mut R, gold: &Document) -> Document {
    let mut d = Document::new(gold.doc_id.clone(), gold.text.clone());
    let mut copy_of = BTreeMap::new();
    for g in &gold.entities {
        if !rng.random_bool(0.8) {
            continue;
        }
        let (mut start, mut end) = (g.start, g.end);
        if rng.random_bool(0.4) {
            start = (start + rng.random_range(0..3)).saturating_sub(1);
            end = (end + rng.random_range(0..4)).saturating_sub(1).max(start + 1);
        }
        let etype = if rng.random_bool(0.9) { g.etype.as_str() } else { ENTITY_TYPES.choose(rng).unwrap() };
        let id = format!("P{}", d.entities.len());
        copy_of.insert(g.id.clone(), id.clone());
        d.entities.push(entity(id, etype, start, end));
    }
    for _ in 0..rng.random_range(0..=2) {
        let start = rng.random_range(0..40);
        let id = format!("P{}", d.entities.len());
        d.entities.push(entity(id, ENTITY_TYPES.choose(rng).unwrap(), start, start + rng.random_range(1..6)));
    }
    for r in &gold.relations {
        let (Some(s), Some(t)) = (copy_of.get(&r.source), copy_of.get(&r.target)) else { continue };
        let copies = if rng.random_bool(0.1) { 2 } else { usize::from(rng.random_bool(0.6)) };
        for _ in 0..copies {
            let rtype = if rng.random_bool(0.9) { r.rtype.as_str() } else { RELATION_TYPES.choose(rng).unwrap() };
            d.relations.push(relation(d.relations.len() + 1, rtype, s, t));
        }
    }
    let n = rng.random_range(0..=2);
    random_relations(rng, &d.entities.clone(), n, &mut d.relations);
    d
}

/// A small random gold/prediction corpus pair, including documents present
/// on only one side.
pub fn random_instance<R: Rng>(rng: &mut R) -> (Vec<Document>, Vec<Document>) {
    let mut gold = Vec::new();
    let mut pred = Vec::new();
    for k in 0..rng.random_range(1..=3) {
        let g = random_gold(rng, format!("d{k}"));
        if !rng.random_bool(0.15) {
            pred.push(noisy_prediction(rng, &g));
        }
        gold.push(g);
    }
    if rng.random_bool(0.15) {
        pred.push(random_gold(rng, "extra".into()));
    }
    (gold, pred)
}

fn ends_match(a: Option<&Entity>, b: Option<&Entity>, lenient: bool) -> bool {
    let (Some(a), Some(b)) = (a, b) else { return false };
    if a.etype != b.etype {
        return false;
    }
    if lenient {
        a.start.max(b.start) < a.end.min(b.end)
    } else {
        (a.start, a.end) == (b.start, b.end)
    }
}

/// Largest number of predictions that can be paired with distinct gold
/// items, trying every assignment.
fn best_assignment(compatible: &[Vec<bool>], i: usize, used: &mut Vec<bool>) -> usize {
    if i == compatible.len() {
        return 0;
    }
    let mut best = best_assignment(compatible, i + 1, used);
    for k in 0..used.len() {
        if compatible[i][k] && !used[k] {
            used[k] = true;
            best = best.max(1 + best_assignment(compatible, i + 1, used));
            used[k] = false;
        }
    }
    best
}

/// Exhaustive per-type counts over all documents of either side.
pub fn brute_force_counts(gold: &[Document], pred: &[Document], lenient: bool) -> Counts {
    let ids: BTreeSet<&str> = gold.iter().chain(pred).map(|d| d.doc_id.as_str()).collect();
    let mut out = Counts::new();
    let empty = Document::new("", "");
    for id in ids {
        let g = gold.iter().find(|d| d.doc_id == id).unwrap_or(&empty);
        let p = pred.iter().find(|d| d.doc_id == id).unwrap_or(&empty);
        let types: BTreeSet<&str> = g
            .relations
            .iter()
            .chain(&p.relations)
            .map(|r| r.rtype.as_str())
            .filter(|t| *t != SAME_FRAME)
            .collect();
        for t in types {
            let gs: Vec<&Relation> = g.relations.iter().filter(|r| r.rtype == t).collect();
            let ps: Vec<&Relation> = p.relations.iter().filter(|r| r.rtype == t).collect();
            let compatible: Vec<Vec<bool>> = ps
                .iter()
                .map(|pr| {
                    gs.iter()
                        .map(|gr| {
                            ends_match(p.entity(&pr.source), g.entity(&gr.source), lenient)
                                && ends_match(p.entity(&pr.target), g.entity(&gr.target), lenient)
                        })
                        .collect()
                })
                .collect();
            let tp = best_assignment(&compatible, 0, &mut vec![false; gs.len()]);
            let c = out.entry(t.to_string()).or_default();
            c.0 += tp;
            c.1 += ps.len() - tp;
            c.2 += gs.len() - tp;
        }
    }
    out
}

/// Precision, recall and F1 from counts; undefined ratios are 0.
pub fn scores(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    (ratio(tp, tp + fp), ratio(tp, tp + fn_), ratio(2 * tp, 2 * tp + fp + fn_))
}

fn row_agrees(row: &PrfRow, (tp, fp, fn_): (usize, usize, usize)) -> Result<(), String> {
    if (row.tp, row.fp, row.fn_) != (tp, fp, fn_) {
        return Err(format!("counts {:?} vs {:?}", (row.tp, row.fp, row.fn_), (tp, fp, fn_)));
    }
    let (p, r, f) = scores(tp, fp, fn_);
    for (name, got, want) in [("precision", row.precision, p), ("recall", row.recall, r), ("f1", row.f1, f)] {
        if (got - want).abs() > SCORE_TOLERANCE {
            return Err(format!("{name} {got} vs {want}"));
        }
    }
    Ok(())
}

/// Checks every per-type row and the micro row of `report` against the
/// exhaustive counts.
pub fn compare(report: &EvalReport, oracle: &Counts) -> Result<(), String> {
    let got: Vec<&String> = report.per_type.keys().collect();
    let want: Vec<&String> = oracle.keys().collect();
    if got != want {
        return Err(format!("types {got:?} vs {want:?}"));
    }
    let mut micro = (0, 0, 0);
    for (t, &c) in oracle {
        row_agrees(&report.per_type[t], c).map_err(|e| format!("{t}: {e}"))?;
        micro = (micro.0 + c.0, micro.1 + c.1, micro.2 + c.2);
    }
    row_agrees(&report.micro, micro).map_err(|e| format!("micro: {e}"))
}
