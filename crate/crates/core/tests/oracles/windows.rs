use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng;
use regimen::corpus::{Document, Entity, Relation, OTHER_TYPE};

const WORDS: [&str; 14] = [
    "aspirin", "500", "mg", "every", "week", "from", "July", "to", "October", "then", "arrêt", "été", "IV", "x2",
];
const PUNCT: [&str; 3] = [",", ".", ":"];
const ENTITY_TYPES: [&str; 4] = ["Drug", "Date", "Route", "Frequency"];
const RELATION_TYPES: [&str; 2] = ["Start", "Refer_to"];

/// Random text with word-aligned, non-overlapping entities (some typed
/// `OTHER`) and relations between distinct entities.
pub fn random_document<R: Rng>(rng: &mut R, doc_id: &str) -> Document {
    let mut text = String::new();
    let mut len = 0;
    let mut spans = Vec::new();
    for k in 0..rng.random_range(0..90) {
        let punct = k > 0 && rng.random_bool(0.12);
        let w = if punct { PUNCT.choose(rng).unwrap() } else { WORDS.choose(rng).unwrap() };
        if k > 0 && !punct {
            let sep = if rng.random_bool(0.08) { "\n" } else { " " };
            text.push_str(sep);
            len += 1;
        }
        text.push_str(w);
        spans.push((len, len + w.chars().count()));
        len += w.chars().count();
    }
    let mut doc = Document::new(doc_id, text.clone());
    let chars: Vec<char> = text.chars().collect();
    let mut k = 0;
    while k < spans.len() {
        if rng.random_bool(0.3) {
            let last = (k + rng.random_range(0..3)).min(spans.len() - 1);
            let (start, end) = (spans[k].0, spans[last].1);
            let etype = if rng.random_bool(0.1) { OTHER_TYPE } else { ENTITY_TYPES.choose(rng).unwrap() };
            doc.entities.push(Entity {
                id: format!("T{}", doc.entities.len() + 1),
                etype: etype.to_string(),
                start,
                end,
                surface: chars[start..end].iter().collect(),
            });
            k = last + 1;
        }
        k += 1;
    }
    let m = doc.entities.len();
    let mut pairs = BTreeSet::new();
    if m >= 2 {
        for _ in 0..rng.random_range(0..=2 * m) {
            let s = rng.random_range(0..m);
            let t = rng.random_range(0..m);
            if s != t {
                pairs.insert((s, t));
            }
        }
    }
    for (s, t) in pairs {
        doc.relations.push(Relation {
            id: format!("R{}", doc.relations.len() + 1),
            rtype: RELATION_TYPES.choose(rng).unwrap().to_string(),
            source: doc.entities[s].id.clone(),
            target: doc.entities[t].id.clone(),
        });
    }
    doc
}

/// Window ranges computed character by character: a cut point is inside a
/// token when alphanumeric characters sit on both sides of it.
pub fn brute_windows(text: &str, window: usize, stride: usize) -> Vec<(usize, usize)> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let inside = |p: usize| p > 0 && p < n && chars[p - 1].is_alphanumeric() && chars[p].is_alphanumeric();
    let mut out: Vec<(usize, usize)> = Vec::new();
    if n == 0 {
        return out;
    }
    let mut k = 0;
    loop {
        let start = k * stride;
        let end = (start + window).min(n);
        let mut ws = start;
        while inside(ws) {
            ws -= 1;
        }
        let mut we = end;
        while inside(we) {
            we += 1;
        }
        if out.last() != Some(&(ws, we)) {
            out.push((ws, we));
        }
        if end >= n {
            return out;
        }
        k += 1;
    }
}

#[derive(Debug, PartialEq, Eq)]
pub struct WindowTally {
    /// Emitted windows with the ids of their entities.
    pub emitted: Vec<((usize, usize), Vec<String>)>,
    pub excluded: usize,
    pub unreachable: usize,
}

/// Enumerates every window, keeps those holding two or more non-`OTHER`
/// entities, and counts relations whose endpoints never share one.
pub fn brute_tally(doc: &Document, window: usize, stride: usize) -> WindowTally {
    let mut emitted = Vec::new();
    let mut excluded = 0;
    for (ws, we) in brute_windows(&doc.text, window, stride) {
        let mut inside: Vec<&Entity> = doc
            .entities
            .iter()
            .filter(|e| e.etype != OTHER_TYPE && e.start >= ws && e.end <= we)
            .collect();
        if inside.len() < 2 {
            excluded += 1;
            continue;
        }
        inside.sort_by_key(|e| (e.start, e.end));
        emitted.push(((ws, we), inside.iter().map(|e| e.id.clone()).collect()));
    }
    let unreachable = doc
        .relations
        .iter()
        .filter(|r| {
            !emitted
                .iter()
                .any(|(_, ids): &(_, Vec<String>)| ids.contains(&r.source) && ids.contains(&r.target))
        })
        .count();
    WindowTally {
        emitted,
        excluded,
        unreachable,
    }
}
