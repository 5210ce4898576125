use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{flatten_surface, CharIndex, Document, SchemaProfile, OTHER_TYPE, SAME_FRAME};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    OffsetOutOfBounds,
    SurfaceMismatch,
    UnknownEntityType,
    UnknownRelationType,
    DuplicateEntityId,
    DuplicateRelationId,
    DanglingRelationArgument,
    SelfRelation,
    DuplicateRelation,
    OverlappingEntities,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::OffsetOutOfBounds => "offset out of bounds",
            Rule::SurfaceMismatch => "surface mismatch",
            Rule::UnknownEntityType => "unknown entity type",
            Rule::UnknownRelationType => "unknown relation type",
            Rule::DuplicateEntityId => "duplicate entity id",
            Rule::DuplicateRelationId => "duplicate relation id",
            Rule::DanglingRelationArgument => "dangling relation argument",
            Rule::SelfRelation => "self-relation",
            Rule::DuplicateRelation => "duplicate relation",
            Rule::OverlappingEntities => "overlapping entities",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    /// Offending entity or relation id.
    pub id: String,
    pub detail: String,
}

impl Violation {
    fn new(rule: Rule, id: &str, detail: impl Into<String>) -> Self {
        Violation {
            rule,
            id: id.to_string(),
            detail: detail.into(),
        }
    }
}

/// Lists every broken document invariant. An empty list means the document
/// is well formed under `schema`.
pub fn validate_document(doc: &Document, schema: &SchemaProfile) -> Vec<Violation> {
    let mut out = Vec::new();
    let chars = CharIndex::new(&doc.text);
    let len = chars.char_len();

    let mut seen_ids = HashSet::new();
    for e in &doc.entities {
        if !seen_ids.insert(e.id.as_str()) {
            out.push(Violation::new(Rule::DuplicateEntityId, &e.id, "entity id reused"));
        }
        if e.etype != OTHER_TYPE && !schema.has_entity_type(&e.etype) {
            out.push(Violation::new(Rule::UnknownEntityType, &e.id, e.etype.clone()));
        }
        match chars.slice(e.start, e.end).filter(|_| e.start < e.end) {
            None => out.push(Violation::new(
                Rule::OffsetOutOfBounds,
                &e.id,
                format!("{}..{} with text length {len}", e.start, e.end),
            )),
            Some(slice) => {
                if flatten_surface(slice) != flatten_surface(&e.surface) {
                    out.push(Violation::new(
                        Rule::SurfaceMismatch,
                        &e.id,
                        format!("{:?} vs {:?}", e.surface, slice),
                    ));
                }
            }
        }
    }

    let mut ranked: Vec<_> = doc
        .entities
        .iter()
        .filter(|e| e.etype != OTHER_TYPE)
        .collect();
    ranked.sort_by_key(|e| (e.start, e.end));
    for w in ranked.windows(2) {
        if w[0].overlaps(w[1]) {
            out.push(Violation::new(
                Rule::OverlappingEntities,
                &w[1].id,
                format!("overlaps {}", w[0].id),
            ));
        }
    }

    let ids: HashMap<&str, ()> = doc.entities.iter().map(|e| (e.id.as_str(), ())).collect();
    let mut rel_ids = HashSet::new();
    let mut triples = HashSet::new();
    for r in &doc.relations {
        if !rel_ids.insert(r.id.as_str()) {
            out.push(Violation::new(Rule::DuplicateRelationId, &r.id, "relation id reused"));
        }
        if r.rtype != SAME_FRAME && !schema.has_relation_type(&r.rtype) {
            out.push(Violation::new(Rule::UnknownRelationType, &r.id, r.rtype.clone()));
        }
        for arg in [&r.source, &r.target] {
            if !ids.contains_key(arg.as_str()) {
                out.push(Violation::new(
                    Rule::DanglingRelationArgument,
                    &r.id,
                    format!("{arg} not found"),
                ));
            }
        }
        if r.source == r.target {
            out.push(Violation::new(Rule::SelfRelation, &r.id, r.source.clone()));
        }
        if !triples.insert((r.rtype.as_str(), r.source.as_str(), r.target.as_str())) {
            out.push(Violation::new(
                Rule::DuplicateRelation,
                &r.id,
                format!("{} {}->{}", r.rtype, r.source, r.target),
            ));
        }
    }
    out
}
