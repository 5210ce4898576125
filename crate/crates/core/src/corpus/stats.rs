use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Document, SchemaProfile};
use crate::frames::build_frames;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub doc_count: usize,
    pub entity_counts: BTreeMap<String, usize>,
    pub entity_total: usize,
    pub relation_counts: BTreeMap<String, usize>,
    pub relation_total: usize,
    /// Drugs that trigger at least one frame (every drug entity does).
    pub framed_drugs: usize,
    /// Drugs that trigger two or more frames.
    pub multi_frame_drugs: usize,
    pub multi_frame_drug_fraction: f64,
}

impl CorpusStats {
    /// Combines tallies of two disjoint corpora.
    pub fn merge(&self, other: &CorpusStats) -> CorpusStats {
        let mut out = self.clone();
        out.doc_count += other.doc_count;
        for (k, v) in &other.entity_counts {
            *out.entity_counts.entry(k.clone()).or_default() += v;
        }
        for (k, v) in &other.relation_counts {
            *out.relation_counts.entry(k.clone()).or_default() += v;
        }
        out.entity_total += other.entity_total;
        out.relation_total += other.relation_total;
        out.framed_drugs += other.framed_drugs;
        out.multi_frame_drugs += other.multi_frame_drugs;
        out.multi_frame_drug_fraction = fraction(out.multi_frame_drugs, out.framed_drugs);
        out
    }

    /// Share of a relation type among all relations.
    pub fn relation_share(&self, rtype: &str) -> f64 {
        fraction(
            self.relation_counts.get(rtype).copied().unwrap_or(0),
            self.relation_total,
        )
    }
}

fn fraction(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn corpus_stats(corpus: &[Document], schema: &SchemaProfile) -> CorpusStats {
    let mut s = CorpusStats {
        doc_count: corpus.len(),
        ..Default::default()
    };
    for doc in corpus {
        for e in &doc.entities {
            *s.entity_counts.entry(e.etype.clone()).or_default() += 1;
        }
        for r in &doc.relations {
            *s.relation_counts.entry(r.rtype.clone()).or_default() += 1;
        }
        s.entity_total += doc.entities.len();
        s.relation_total += doc.relations.len();

        let frames = build_frames(doc, schema);
        let mut per_drug: BTreeMap<&str, usize> = BTreeMap::new();
        for f in &frames.frames {
            *per_drug.entry(f.drug.as_str()).or_default() += 1;
        }
        s.framed_drugs += per_drug.len();
        s.multi_frame_drugs += per_drug.values().filter(|&&n| n >= 2).count();
    }
    s.multi_frame_drug_fraction = fraction(s.multi_frame_drugs, s.framed_drugs);
    s
}
