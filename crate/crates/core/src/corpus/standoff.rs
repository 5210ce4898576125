//! Reading and writing `.txt` + `.ann` pairs.
//!
//! Only single-span `T` lines and binary `R` lines are interpreted. Comment,
//! attribute and note lines (`#`, `A`, `M`, `N`) are skipped.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{
    flatten_surface, validate_document, CharIndex, CorpusError, Document, Entity, Relation,
    SchemaMode, SchemaProfile, OTHER_TYPE, SAME_FRAME,
};

/// Builds a [`Document`] from raw text and its standoff annotations.
pub fn parse_standoff(
    doc_id: &str,
    text: &str,
    ann: &str,
    schema: &SchemaProfile,
    mode: SchemaMode,
) -> Result<Document, CorpusError> {
    let chars = CharIndex::new(text);
    let mut doc = Document::new(doc_id, text);
    let mut pending = Vec::new();

    for (lineno, raw) in ann.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        let lineno = lineno + 1;
        let malformed = |reason| CorpusError::Malformed {
            line: lineno,
            content: line.to_string(),
            reason,
        };
        match line.chars().next() {
            None => continue,
            Some('#' | 'A' | 'M' | 'N') => continue,
            Some('T') => {
                let mut fields = line.splitn(3, '\t');
                let id = fields.next().unwrap_or_default();
                let body = fields.next().ok_or_else(|| malformed("missing type and offsets"))?;
                let surface = fields.next().ok_or_else(|| malformed("missing surface"))?;
                if body.contains(';') {
                    return Err(CorpusError::FragmentedSpan { id: id.to_string() });
                }
                let parts: Vec<&str> = body.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(malformed("expected `<Type> <start> <end>`"));
                }
                let start: usize = parts[1].parse().map_err(|_| malformed("bad start offset"))?;
                let end: usize = parts[2].parse().map_err(|_| malformed("bad end offset"))?;
                let slice = chars
                    .slice(start, end)
                    .filter(|_| start < end)
                    .ok_or_else(|| CorpusError::OffsetOutOfBounds {
                        id: id.to_string(),
                        start,
                        end,
                        len: chars.char_len(),
                    })?;
                if flatten_surface(slice) != flatten_surface(surface) {
                    return Err(CorpusError::SurfaceMismatch {
                        id: id.to_string(),
                        expected: slice.to_string(),
                        found: surface.to_string(),
                    });
                }
                let mut etype = parts[0].to_string();
                if !schema.has_entity_type(&etype) {
                    match mode {
                        SchemaMode::Strict => {
                            return Err(CorpusError::UnknownEntityType {
                                id: id.to_string(),
                                etype,
                            })
                        }
                        SchemaMode::Lax => etype = OTHER_TYPE.to_string(),
                    }
                }
                doc.entities.push(Entity {
                    id: id.to_string(),
                    etype,
                    start,
                    end,
                    surface: slice.to_string(),
                });
            }
            Some('R') => {
                let mut fields = line.splitn(2, '\t');
                let id = fields.next().unwrap_or_default();
                let body = fields.next().ok_or_else(|| malformed("missing relation body"))?;
                let mut parts = body.split_whitespace();
                let rtype = parts.next().ok_or_else(|| malformed("missing relation type"))?;
                let args: Vec<&str> = parts
                    .map(|p| p.split_once(':').map_or(p, |(_, v)| v))
                    .collect();
                if args.len() != 2 {
                    return Err(malformed("expected two relation arguments"));
                }
                if rtype != SAME_FRAME && !schema.has_relation_type(rtype) {
                    match mode {
                        SchemaMode::Strict => {
                            return Err(CorpusError::UnknownRelationType {
                                id: id.to_string(),
                                rtype: rtype.to_string(),
                            })
                        }
                        SchemaMode::Lax => continue,
                    }
                }
                pending.push(Relation {
                    id: id.to_string(),
                    rtype: rtype.to_string(),
                    source: args[0].to_string(),
                    target: args[1].to_string(),
                });
            }
            Some(_) => return Err(malformed("unsupported annotation line")),
        }
    }

    let ids: HashMap<&str, ()> = doc.entities.iter().map(|e| (e.id.as_str(), ())).collect();
    for r in &pending {
        for arg in [&r.source, &r.target] {
            if !ids.contains_key(arg.as_str()) {
                return Err(CorpusError::DanglingArgument {
                    relation: r.id.clone(),
                    arg: arg.clone(),
                });
            }
        }
    }
    doc.relations = pending;

    let violations = validate_document(&doc, schema);
    if !violations.is_empty() {
        return Err(CorpusError::Invalid {
            doc_id: doc_id.to_string(),
            violations,
        });
    }
    Ok(doc)
}

/// Renders a document as `(text, ann)`. Entities are renumbered `T1..` and
/// relations `R1..` in list order.
pub fn serialize_standoff(doc: &Document) -> (String, String) {
    let mut ann = String::new();
    let mut rename = HashMap::new();
    for (i, e) in doc.entities.iter().enumerate() {
        let id = format!("T{}", i + 1);
        ann.push_str(&format!(
            "{id}\t{} {} {}\t{}\n",
            e.etype,
            e.start,
            e.end,
            flatten_surface(&e.surface)
        ));
        rename.insert(e.id.as_str(), id);
    }
    for (i, r) in doc.relations.iter().enumerate() {
        let src = rename.get(r.source.as_str()).map_or(r.source.as_str(), String::as_str);
        let tgt = rename.get(r.target.as_str()).map_or(r.target.as_str(), String::as_str);
        ann.push_str(&format!("R{}\t{} Arg1:{src} Arg2:{tgt}\n", i + 1, r.rtype));
    }
    (doc.text.clone(), ann)
}

pub fn load_document(
    dir: &Path,
    doc_id: &str,
    schema: &SchemaProfile,
    mode: SchemaMode,
) -> Result<Document, CorpusError> {
    let txt = dir.join(format!("{doc_id}.txt"));
    let ann = dir.join(format!("{doc_id}.ann"));
    let text = fs::read_to_string(&txt).map_err(|e| CorpusError::io(&txt, e))?;
    let annotations = fs::read_to_string(&ann).map_err(|e| CorpusError::io(&ann, e))?;
    parse_standoff(doc_id, &text, &annotations, schema, mode)
}

/// Loads every `<id>.txt`/`<id>.ann` pair in `dir`, sorted by document id.
pub fn load_corpus(
    dir: &Path,
    schema: &SchemaProfile,
    mode: SchemaMode,
) -> Result<Vec<Document>, CorpusError> {
    let ids = doc_ids(dir)?;
    let missing: Vec<String> = ids
        .iter()
        .filter(|id| !dir.join(format!("{id}.ann")).is_file())
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(CorpusError::MissingAnnotations(missing));
    }
    ids.iter()
        .map(|id| load_document(dir, id, schema, mode))
        .collect()
}

/// Sorted ids of every `.txt` file in `dir`.
pub(crate) fn doc_ids(dir: &Path) -> Result<Vec<String>, CorpusError> {
    let entries = fs::read_dir(dir).map_err(|e| CorpusError::io(dir, e))?;
    let mut ids = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CorpusError::io(dir, e))?.path();
        if path.extension().and_then(|s| s.to_str()) == Some("txt") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

pub fn save_document(dir: &Path, doc: &Document) -> Result<(), CorpusError> {
    fs::create_dir_all(dir).map_err(|e| CorpusError::io(dir, e))?;
    let (text, ann) = serialize_standoff(doc);
    let txt = dir.join(format!("{}.txt", doc.doc_id));
    fs::write(&txt, text).map_err(|e| CorpusError::io(&txt, e))?;
    let annp = dir.join(format!("{}.ann", doc.doc_id));
    fs::write(&annp, ann).map_err(|e| CorpusError::io(&annp, e))
}

pub fn save_corpus(dir: &Path, docs: &[Document]) -> Result<(), CorpusError> {
    docs.iter().try_for_each(|d| save_document(dir, d))
}
