use crate::corpus::{Document, Entity, Relation, SchemaProfile};
use crate::frames::{frames_to_relations, Frame, FrameSet, Link};

/// A document under construction. Text grows left to right, so entity ids
/// follow reading order and offsets are known exactly when a mention is
/// written.
#[derive(Default)]
pub(super) struct Draft {
    text: String,
    chars: usize,
    entities: Vec<Entity>,
    frames: Vec<Frame>,
    doc_relations: Vec<(String, String, String)>,
}

impl Draft {
    fn raw(&mut self, s: &str) {
        self.text.push_str(s);
        self.chars += s.chars().count();
    }

    fn space_before(&mut self, s: &str) {
        let glue = matches!(s.chars().next(), Some(',' | '.' | ':' | ';'));
        if !glue && !self.text.is_empty() && !self.text.ends_with([' ', '\n']) {
            self.raw(" ");
        }
    }

    /// Appends plain words, separated from the previous piece by a space
    /// unless they start with punctuation.
    pub fn word(&mut self, s: &str) {
        if s.is_empty() {
            return;
        }
        self.space_before(s);
        self.raw(s);
    }

    pub fn newline(&mut self) {
        self.raw("\n");
    }

    /// Appends an annotated mention and returns its id.
    pub fn ent(&mut self, etype: &str, surface: &str) -> String {
        self.space_before(surface);
        let id = format!("T{}", self.entities.len() + 1);
        let start = self.chars;
        self.raw(surface);
        self.entities.push(Entity {
            id: id.clone(),
            etype: etype.to_string(),
            start,
            end: self.chars,
            surface: surface.to_string(),
        });
        id
    }

    pub fn frame(&mut self, drug: &str, links: &[(&str, &str)]) {
        self.frames.push(Frame {
            drug: drug.to_string(),
            links: links
                .iter()
                .map(|(a, r)| Link {
                    attribute: a.to_string(),
                    rtype: r.to_string(),
                })
                .collect(),
        });
    }

    pub fn doc_relation(&mut self, rtype: &str, source: &str, target: &str) {
        self.doc_relations
            .push((rtype.to_string(), source.to_string(), target.to_string()));
    }

    /// Finalises the text and relations. Relations are the frame encoding
    /// (attribute links plus `SAME_FRAME` edges) followed by document-level
    /// relations.
    pub fn finish(self, doc_id: &str, schema: &SchemaProfile) -> (Document, FrameSet) {
        let mut frames = FrameSet {
            doc_id: doc_id.to_string(),
            frames: self.frames,
        };
        // Drugs mentioned without a frame of their own (coreferent classes,
        // discontinued drugs) still trigger an empty one.
        for e in self.entities.iter().filter(|e| schema.is_drug(&e.etype)) {
            if !frames.frames.iter().any(|f| f.drug == e.id) {
                frames.frames.push(Frame {
                    drug: e.id.clone(),
                    links: Vec::new(),
                });
            }
        }
        frames.canonicalize(&self.entities);
        let mut relations = frames_to_relations(&frames, &self.entities, true);
        for (rtype, source, target) in self.doc_relations {
            relations.push(Relation {
                id: format!("R{}", relations.len() + 1),
                rtype,
                source,
                target,
            });
        }
        let doc = Document {
            doc_id: doc_id.to_string(),
            text: self.text,
            entities: self.entities,
            relations,
        };
        (doc, frames)
    }
}
