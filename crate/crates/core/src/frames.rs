//! Regimen frames: a drug plus the attribute group describing one period of
//! its prescription.
//!
//! Frame membership is carried in documents by `SAME_FRAME` edges between
//! attributes, written as a complete graph per frame. Decoding recovers each
//! drug's frames as the maximal cliques of those edges, which keeps
//! attributes shared by two periods (a route, a boundary date) in both.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Entity, Relation, SchemaProfile, SAME_FRAME};

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Link {
    pub attribute: String,
    pub rtype: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Frame {
    pub drug: String,
    pub links: Vec<Link>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSet {
    pub doc_id: String,
    pub frames: Vec<Frame>,
}

impl FrameSet {
    /// Number of frames per drug id.
    pub fn frames_per_drug(&self) -> BTreeMap<&str, usize> {
        let mut out = BTreeMap::new();
        for f in &self.frames {
            *out.entry(f.drug.as_str()).or_default() += 1;
        }
        out
    }

    /// Sorts frames and links into the order `decode_frames` produces.
    pub fn canonicalize(&mut self, entities: &[Entity]) {
        let by_id: HashMap<&str, &Entity> = entities.iter().map(|e| (e.id.as_str(), e)).collect();
        for f in &mut self.frames {
            sort_links(&mut f.links, &by_id);
        }
        self.frames.sort_by_cached_key(|f| frame_key(f, &by_id));
    }
}

/// A `SAME_FRAME` edge that could not be attributed to any single drug.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameViolation {
    pub relation: String,
    pub detail: String,
}

type OffsetKey = (usize, usize, String);

fn offset_key(id: &str, by_id: &HashMap<&str, &Entity>) -> OffsetKey {
    by_id
        .get(id)
        .map_or((usize::MAX, usize::MAX, id.to_string()), |e| {
            (e.start, e.end, e.id.clone())
        })
}

fn sort_links(links: &mut [Link], by_id: &HashMap<&str, &Entity>) {
    links.sort_by_cached_key(|l| (offset_key(&l.attribute, by_id), l.rtype.clone()));
}

fn frame_key(f: &Frame, by_id: &HashMap<&str, &Entity>) -> (OffsetKey, Vec<OffsetKey>) {
    let mut attrs: Vec<OffsetKey> = f
        .links
        .iter()
        .map(|l| offset_key(&l.attribute, by_id))
        .collect();
    attrs.sort();
    attrs.dedup();
    (offset_key(&f.drug, by_id), attrs)
}

/// Frames of a gold document.
pub fn build_frames(doc: &Document, schema: &SchemaProfile) -> FrameSet {
    decode_frames(&doc.doc_id, &doc.entities, &doc.relations, schema)
}

/// Frames of a gold document plus any `SAME_FRAME` edges that were ignored.
pub fn build_frames_with_violations(
    doc: &Document,
    schema: &SchemaProfile,
) -> (FrameSet, Vec<FrameViolation>) {
    frames_from_relations(&doc.doc_id, &doc.entities, &doc.relations, schema)
}

/// Groups (possibly predicted) relations into frames.
///
/// Every drug entity yields at least one frame. A drug whose attributes carry
/// no `SAME_FRAME` edges gets a single frame holding all of them.
pub fn decode_frames(
    doc_id: &str,
    entities: &[Entity],
    relations: &[Relation],
    schema: &SchemaProfile,
) -> FrameSet {
    frames_from_relations(doc_id, entities, relations, schema).0
}

fn frames_from_relations(
    doc_id: &str,
    entities: &[Entity],
    relations: &[Relation],
    schema: &SchemaProfile,
) -> (FrameSet, Vec<FrameViolation>) {
    let by_id: HashMap<&str, &Entity> = entities.iter().map(|e| (e.id.as_str(), e)).collect();

    // drug id -> attribute id -> link types
    let mut attrs: BTreeMap<&str, BTreeMap<&str, BTreeSet<&str>>> = BTreeMap::new();
    for e in entities.iter().filter(|e| schema.is_drug(&e.etype)) {
        attrs.entry(e.id.as_str()).or_default();
    }
    for r in relations {
        if r.rtype == SAME_FRAME || !schema.is_frame_relation(&r.rtype) {
            continue;
        }
        let (Some(src), Some(tgt)) = (by_id.get(r.source.as_str()), by_id.get(r.target.as_str()))
        else {
            continue;
        };
        if !schema.is_drug(&tgt.etype) || !schema.is_attribute(&src.etype) {
            continue;
        }
        attrs
            .entry(tgt.id.as_str())
            .or_default()
            .entry(src.id.as_str())
            .or_default()
            .insert(r.rtype.as_str());
    }

    let edges: Vec<&Relation> = relations.iter().filter(|r| r.rtype == SAME_FRAME).collect();
    let mut used = vec![false; edges.len()];
    let mut frames = Vec::new();

    for (drug, links) in &attrs {
        let nodes: Vec<&str> = links.keys().copied().collect();
        let pos: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (*n, i)).collect();
        let mut adj = vec![vec![false; nodes.len()]; nodes.len()];
        let mut any_edge = false;
        for (k, e) in edges.iter().enumerate() {
            if let (Some(&a), Some(&b)) = (pos.get(e.source.as_str()), pos.get(e.target.as_str())) {
                if a != b {
                    adj[a][b] = true;
                    adj[b][a] = true;
                    any_edge = true;
                    used[k] = true;
                }
            }
        }
        let groups = if any_edge {
            maximal_cliques(&adj)
        } else {
            vec![(0..nodes.len()).collect()]
        };
        for group in groups {
            let links = group
                .iter()
                .flat_map(|&i| {
                    let attr = nodes[i];
                    links[attr].iter().map(move |t| Link {
                        attribute: attr.to_string(),
                        rtype: t.to_string(),
                    })
                })
                .collect();
            frames.push(Frame {
                drug: drug.to_string(),
                links,
            });
        }
    }

    let violations = edges
        .iter()
        .zip(&used)
        .filter(|(_, &u)| !u)
        .map(|(e, _)| FrameViolation {
            relation: e.id.clone(),
            detail: format!(
                "{} and {} are not attributes of a common drug",
                e.source, e.target
            ),
        })
        .collect();

    let mut fs = FrameSet {
        doc_id: doc_id.to_string(),
        frames,
    };
    fs.canonicalize(entities);
    (fs, violations)
}

/// Bron-Kerbosch with pivoting. Isolated vertices come out as singletons.
fn maximal_cliques(adj: &[Vec<bool>]) -> Vec<Vec<usize>> {
    fn expand(
        adj: &[Vec<bool>],
        r: &mut Vec<usize>,
        mut p: Vec<usize>,
        mut x: Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if p.is_empty() && x.is_empty() {
            let mut c = r.clone();
            c.sort_unstable();
            out.push(c);
            return;
        }
        let pivot = *p
            .iter()
            .chain(&x)
            .max_by_key(|&&u| p.iter().filter(|&&v| adj[u][v]).count())
            .expect("p or x is non-empty");
        let candidates: Vec<usize> = p.iter().copied().filter(|&v| !adj[pivot][v]).collect();
        for v in candidates {
            r.push(v);
            let np = p.iter().copied().filter(|&u| adj[v][u]).collect();
            let nx = x.iter().copied().filter(|&u| adj[v][u]).collect();
            expand(adj, r, np, nx, out);
            r.pop();
            p.retain(|&u| u != v);
            x.push(v);
        }
    }
    let mut out = Vec::new();
    expand(adj, &mut Vec::new(), (0..adj.len()).collect(), Vec::new(), &mut out);
    out.sort();
    out
}

/// Flattens frames back into relations: one attribute-to-drug relation per
/// distinct link, then (optionally) a `SAME_FRAME` edge for every attribute
/// pair inside each frame, directed from the earlier to the later mention.
/// Relations shared between frames are emitted once.
pub fn frames_to_relations(
    fs: &FrameSet,
    entities: &[Entity],
    include_same_frame: bool,
) -> Vec<Relation> {
    let by_id: HashMap<&str, &Entity> = entities.iter().map(|e| (e.id.as_str(), e)).collect();
    let mut seen: HashSet<(String, String, String)> = HashSet::new();
    let mut out = Vec::new();
    let mut push = |rtype: &str, source: &str, target: &str, out: &mut Vec<Relation>| {
        if seen.insert((rtype.to_string(), source.to_string(), target.to_string())) {
            out.push(Relation {
                id: format!("R{}", out.len() + 1),
                rtype: rtype.to_string(),
                source: source.to_string(),
                target: target.to_string(),
            });
        }
    };
    for f in &fs.frames {
        for l in &f.links {
            push(&l.rtype, &l.attribute, &f.drug, &mut out);
        }
    }
    if include_same_frame {
        for f in &fs.frames {
            let mut members: Vec<&str> = f.links.iter().map(|l| l.attribute.as_str()).collect();
            members.sort_by_cached_key(|a| offset_key(a, &by_id));
            members.dedup();
            for (i, a) in members.iter().enumerate() {
                for b in &members[i + 1..] {
                    push(SAME_FRAME, a, b, &mut out);
                }
            }
        }
    }
    out
}

/// Replaces a document's relations by the frame encoding of `fs`, keeping
/// document-level relations (coreference and the like) untouched.
pub fn with_frame_relations(doc: &Document, fs: &FrameSet, schema: &SchemaProfile) -> Document {
    let mut relations = frames_to_relations(fs, &doc.entities, true);
    let frame_keys: HashSet<(&str, &str, &str)> = relations
        .iter()
        .map(|r| (r.rtype.as_str(), r.source.as_str(), r.target.as_str()))
        .collect();
    let extra: Vec<Relation> = doc
        .relations
        .iter()
        .filter(|r| r.rtype != SAME_FRAME && !schema.is_frame_relation(&r.rtype))
        .filter(|r| !frame_keys.contains(&(r.rtype.as_str(), r.source.as_str(), r.target.as_str())))
        .cloned()
        .collect();
    relations.extend(extra);
    for (i, r) in relations.iter_mut().enumerate() {
        r.id = format!("R{}", i + 1);
    }
    Document {
        relations,
        ..doc.clone()
    }
}
