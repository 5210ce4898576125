//! Standoff-annotated documents and their label schemas.

mod schema;
mod standoff;
mod stats;
mod validate;

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use schema::{SchemaMode, SchemaProfile, OTHER_TYPE, SAME_FRAME};
pub use standoff::{
    load_corpus, load_document, parse_standoff, save_corpus, save_document, serialize_standoff,
};
pub use stats::{corpus_stats, CorpusStats};
pub use validate::{validate_document, Rule, Violation};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}: {content:?}")]
    Malformed {
        line: usize,
        content: String,
        reason: &'static str,
    },
    #[error("entity {id}: offsets {start}..{end} out of bounds for text of {len} characters")]
    OffsetOutOfBounds {
        id: String,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("entity {id}: surface {found:?} does not match text {expected:?}")]
    SurfaceMismatch {
        id: String,
        expected: String,
        found: String,
    },
    #[error("entity {id}: fragmented spans are not supported")]
    FragmentedSpan { id: String },
    #[error("entity {id}: unknown entity type {etype:?}")]
    UnknownEntityType { id: String, etype: String },
    #[error("relation {id}: unknown relation type {rtype:?}")]
    UnknownRelationType { id: String, rtype: String },
    #[error("relation {relation}: argument {arg} does not name an entity")]
    DanglingArgument { relation: String, arg: String },
    #[error("document {doc_id} failed validation: {}", summarize(.violations))]
    Invalid {
        doc_id: String,
        violations: Vec<Violation>,
    },
    #[error("invalid schema profile: {0}")]
    InvalidSchema(String),
    #[error("unknown schema profile {0:?}")]
    UnknownProfile(String),
    #[error("missing annotation files for documents: {}", .0.join(", "))]
    MissingAnnotations(Vec<String>),
}

fn summarize(v: &[Violation]) -> String {
    v.iter()
        .map(|x| format!("{} ({})", x.rule.as_str(), x.id))
        .collect::<Vec<_>>()
        .join("; ")
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// A typed span over the document text. Offsets count Unicode scalar values
/// and are half-open.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub etype: String,
    pub start: usize,
    pub end: usize,
    pub surface: String,
}

impl Entity {
    pub fn overlaps(&self, other: &Entity) -> bool {
        self.start < other.end && other.start < self.end
    }
}

/// A typed directed link, stored attribute (source) to drug (target).
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub id: String,
    pub rtype: String,
    pub source: String,
    pub target: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub entities: Vec<Entity>,
    pub relations: Vec<Relation>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            doc_id: doc_id.into(),
            text: text.into(),
            entities: Vec::new(),
            relations: Vec::new(),
        }
    }

    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    /// Entity id to position in `entities`.
    pub fn entity_index(&self) -> HashMap<&str, usize> {
        self.entities
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.as_str(), i))
            .collect()
    }

    /// The same document without relations of the given type.
    pub fn without_relation_type(&self, rtype: &str) -> Document {
        Document {
            relations: self
                .relations
                .iter()
                .filter(|r| r.rtype != rtype)
                .cloned()
                .collect(),
            ..self.clone()
        }
    }

    /// The same document with entities only.
    pub fn entities_only(&self) -> Document {
        Document {
            relations: Vec::new(),
            ..self.clone()
        }
    }
}

/// Byte positions of every character boundary, for slicing by char offsets.
pub struct CharIndex<'a> {
    text: &'a str,
    bounds: Vec<usize>,
}

impl<'a> CharIndex<'a> {
    pub fn new(text: &'a str) -> Self {
        let mut bounds: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        bounds.push(text.len());
        CharIndex { text, bounds }
    }

    pub fn char_len(&self) -> usize {
        self.bounds.len() - 1
    }

    pub fn slice(&self, start: usize, end: usize) -> Option<&'a str> {
        if start > end || end > self.char_len() {
            return None;
        }
        Some(&self.text[self.bounds[start]..self.bounds[end]])
    }
}

/// Standoff surfaces cannot hold line breaks; they are written as spaces.
pub(crate) fn flatten_surface(s: &str) -> String {
    s.chars()
        .map(|c| if c == '\n' || c == '\r' || c == '\t' { ' ' } else { c })
        .collect()
}
