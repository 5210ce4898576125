//! Tokenization, sliding character windows, token labels and ordered
//! entity-pair targets.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Document, Entity, Relation, SchemaProfile, OTHER_TYPE, SAME_FRAME};

/// Class name of ordered pairs that carry no relation.
pub const NULL_REL: &str = "NULL_REL";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WindowError {
    #[error("window of {window} characters with stride {stride} is invalid (need 0 < stride <= window)")]
    BadWindow { window: usize, stride: usize },
    #[error("entities {0} and {1} overlap")]
    OverlappingEntities(String, String),
    #[error("entity {0} covers no token")]
    EntityWithoutTokens(String),
    #[error("entity pair {from}->{target} carries two relation types: {first} and {second}")]
    ConflictingRelations {
        from: String,
        target: String,
        first: String,
        second: String,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub surface: String,
    pub start: usize,
    pub end: usize,
}

/// Splits text into alphanumeric runs and single punctuation characters.
/// Line breaks become standalone `"\n"` tokens; other whitespace separates.
pub fn tokenize(text: &str) -> Vec<Token> {
    let mut out = Vec::new();
    let mut run: Option<(usize, String)> = None;
    let flush = |run: &mut Option<(usize, String)>, out: &mut Vec<Token>, end: usize| {
        if let Some((start, surface)) = run.take() {
            out.push(Token { surface, start, end });
        }
    };
    let mut n = 0;
    for (i, c) in text.chars().enumerate() {
        n = i + 1;
        if c.is_alphanumeric() {
            match &mut run {
                Some((_, s)) => s.push(c),
                None => run = Some((i, c.to_string())),
            }
            continue;
        }
        flush(&mut run, &mut out, i);
        if c == '\n' || !c.is_whitespace() {
            out.push(Token {
                surface: c.to_string(),
                start: i,
                end: i + 1,
            });
        }
    }
    flush(&mut run, &mut out, n);
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_chars: usize,
    pub stride_chars: usize,
}

impl WindowConfig {
    /// Window of `window_chars` with half-window stride.
    pub fn new(window_chars: usize) -> Self {
        WindowConfig {
            window_chars,
            stride_chars: (window_chars / 2).max(1),
        }
    }

    pub fn with_stride(window_chars: usize, stride_chars: usize) -> Self {
        WindowConfig {
            window_chars,
            stride_chars,
        }
    }

    pub fn check(&self) -> Result<(), WindowError> {
        if self.stride_chars == 0 || self.stride_chars > self.window_chars {
            return Err(WindowError::BadWindow {
                window: self.window_chars,
                stride: self.stride_chars,
            });
        }
        Ok(())
    }
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig::new(300)
    }
}

/// One window of a document holding at least two entities.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub doc_id: String,
    pub window_index: usize,
    pub window_start: usize,
    pub window_end: usize,
    pub tokens: Vec<Token>,
    /// Entities fully inside the window, ordered by offset.
    pub entities: Vec<Entity>,
    /// Token range `[first, last + 1)` of each entity, local to `tokens`.
    pub spans: Vec<(usize, usize)>,
}

impl Segment {
    /// Index of the first token of each entity.
    pub fn heads(&self) -> Vec<usize> {
        self.spans.iter().map(|s| s.0).collect()
    }

    /// Number of ordered pairs of distinct entities.
    pub fn pair_count(&self) -> usize {
        let m = self.entities.len();
        m * m.saturating_sub(1)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowReport {
    pub segments_emitted: usize,
    pub segments_excluded: usize,
    pub unreachable_relations: usize,
    /// Segment count per 10-token bucket, keyed by the bucket's lower bound.
    pub tokens_per_segment: BTreeMap<usize, usize>,
}

impl WindowReport {
    pub fn merge(&mut self, other: &WindowReport) {
        self.segments_emitted += other.segments_emitted;
        self.segments_excluded += other.segments_excluded;
        self.unreachable_relations += other.unreachable_relations;
        for (k, v) in &other.tokens_per_segment {
            *self.tokens_per_segment.entry(*k).or_default() += v;
        }
    }
}

/// Character ranges of every window, snapped outward so no token is split.
/// Windows start at multiples of the stride until one reaches the end of
/// the text; consecutive duplicates collapse.
pub fn window_ranges(char_len: usize, tokens: &[Token], cfg: &WindowConfig) -> Vec<(usize, usize)> {
    let inside = |p: usize| {
        let k = tokens.partition_point(|t| t.start < p);
        // token k-1 is the last one starting before p
        k.checked_sub(1)
            .map(|k| &tokens[k])
            .filter(|t| t.start < p && p < t.end)
    };
    let mut out = Vec::new();
    if char_len == 0 {
        return out;
    }
    let mut start = 0;
    loop {
        let end = (start + cfg.window_chars).min(char_len);
        let ws = inside(start).map_or(start, |t| t.start);
        let we = inside(end).map_or(end, |t| t.end);
        if out.last() != Some(&(ws, we)) {
            out.push((ws, we));
        }
        if end >= char_len {
            break;
        }
        start += cfg.stride_chars;
    }
    out
}

/// Token range of every entity, checking that no two entities share a token.
fn entity_token_spans(
    entities: &[&Entity],
    tokens: &[Token],
) -> Result<Vec<(usize, usize)>, WindowError> {
    let mut spans = Vec::with_capacity(entities.len());
    for e in entities {
        let first = tokens.partition_point(|t| t.end <= e.start);
        let last = tokens.partition_point(|t| t.start < e.end);
        if first >= last {
            return Err(WindowError::EntityWithoutTokens(e.id.clone()));
        }
        spans.push((first, last));
    }
    let mut order: Vec<usize> = (0..entities.len()).collect();
    order.sort_by_key(|&i| spans[i]);
    for w in order.windows(2) {
        let (a, b) = (w[0], w[1]);
        if spans[b].0 < spans[a].1 {
            return Err(WindowError::OverlappingEntities(
                entities[a].id.clone(),
                entities[b].id.clone(),
            ));
        }
    }
    Ok(spans)
}

/// Cuts a document into windows, dropping windows with fewer than two
/// entities. `OTHER`-typed entities never count as candidates.
pub fn make_segments(
    doc: &Document,
    cfg: &WindowConfig,
) -> Result<(Vec<Segment>, WindowReport), WindowError> {
    cfg.check()?;
    let tokens = tokenize(&doc.text);
    let mut candidates: Vec<&Entity> = doc.entities.iter().filter(|e| e.etype != OTHER_TYPE).collect();
    candidates.sort_by_key(|e| (e.start, e.end));
    let spans = entity_token_spans(&candidates, &tokens)?;

    let mut report = WindowReport::default();
    let mut segments = Vec::new();
    let mut together: HashSet<(&str, &str)> = HashSet::new();

    for (index, (ws, we)) in window_ranges(doc.char_len(), &tokens, cfg).into_iter().enumerate() {
        let inside: Vec<usize> = (0..candidates.len())
            .filter(|&k| candidates[k].start >= ws && candidates[k].end <= we)
            .collect();
        if inside.len() < 2 {
            report.segments_excluded += 1;
            continue;
        }
        let t0 = tokens.partition_point(|t| t.start < ws);
        let t1 = tokens.partition_point(|t| t.end <= we);
        for &a in &inside {
            for &b in &inside {
                together.insert((candidates[a].id.as_str(), candidates[b].id.as_str()));
            }
        }
        let seg = Segment {
            doc_id: doc.doc_id.clone(),
            window_index: index,
            window_start: ws,
            window_end: we,
            tokens: tokens[t0..t1].to_vec(),
            entities: inside.iter().map(|&k| candidates[k].clone()).collect(),
            spans: inside.iter().map(|&k| (spans[k].0 - t0, spans[k].1 - t0)).collect(),
        };
        report.segments_emitted += 1;
        *report.tokens_per_segment.entry(seg.tokens.len() / 10 * 10).or_default() += 1;
        segments.push(seg);
    }
    report.unreachable_relations = doc
        .relations
        .iter()
        .filter(|r| !together.contains(&(r.source.as_str(), r.target.as_str())))
        .count();
    Ok((segments, report))
}

/// Label id per token: the entity's type inside entity spans, 0 elsewhere.
pub fn align_labels(seg: &Segment, schema: &SchemaProfile) -> Result<Vec<usize>, WindowError> {
    let mut labels = vec![0; seg.tokens.len()];
    let mut owner: Vec<Option<usize>> = vec![None; seg.tokens.len()];
    for (k, (e, &(a, b))) in seg.entities.iter().zip(&seg.spans).enumerate() {
        for t in a..b {
            if let Some(prev) = owner[t] {
                return Err(WindowError::OverlappingEntities(
                    seg.entities[prev].id.clone(),
                    e.id.clone(),
                ));
            }
            owner[t] = Some(k);
            labels[t] = schema.label_id(&e.etype);
        }
    }
    Ok(labels)
}

/// Class inventory of the pairwise classifier: `NULL_REL` first, then the
/// schema's relation types, then `SAME_FRAME` when frame augmentation is on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationClasses {
    pub names: Vec<String>,
}

impl RelationClasses {
    pub fn new(schema: &SchemaProfile, same_frame: bool) -> Self {
        let mut names = vec![NULL_REL.to_string()];
        names.extend(schema.relation_types.iter().cloned());
        if same_frame {
            names.push(SAME_FRAME.to_string());
        }
        RelationClasses { names }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn name(&self, id: usize) -> &str {
        &self.names[id]
    }

    pub fn has_same_frame(&self) -> bool {
        self.names.iter().any(|n| n == SAME_FRAME)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairTarget {
    /// Entity positions within the segment.
    pub source: usize,
    pub target: usize,
    /// Head token indices.
    pub i: usize,
    pub j: usize,
    pub class_id: usize,
}

/// Gold relation classes keyed by ordered entity-id pair. Relation types
/// outside `classes` are ignored.
pub fn relation_lookup<'a>(
    relations: &'a [Relation],
    classes: &RelationClasses,
) -> Result<HashMap<(&'a str, &'a str), usize>, WindowError> {
    let mut map: HashMap<(&str, &str), usize> = HashMap::new();
    for r in relations {
        let Some(class) = classes.id(&r.rtype) else { continue };
        if let Some(&prev) = map.get(&(r.source.as_str(), r.target.as_str())) {
            if prev != class {
                return Err(WindowError::ConflictingRelations {
                    from: r.source.clone(),
                    target: r.target.clone(),
                    first: classes.name(prev).to_string(),
                    second: r.rtype.clone(),
                });
            }
        }
        map.insert((r.source.as_str(), r.target.as_str()), class);
    }
    Ok(map)
}

/// One target per ordered pair of distinct entities, source-major.
pub fn build_pair_targets(
    seg: &Segment,
    relations: &[Relation],
    classes: &RelationClasses,
) -> Result<Vec<PairTarget>, WindowError> {
    let lookup = relation_lookup(relations, classes)?;
    Ok(pair_targets_with(seg, &lookup))
}

pub(crate) fn pair_targets_with(
    seg: &Segment,
    lookup: &HashMap<(&str, &str), usize>,
) -> Vec<PairTarget> {
    let m = seg.entities.len();
    let mut out = Vec::with_capacity(seg.pair_count());
    for a in 0..m {
        for b in 0..m {
            if a == b {
                continue;
            }
            let key = (seg.entities[a].id.as_str(), seg.entities[b].id.as_str());
            out.push(PairTarget {
                source: a,
                target: b,
                i: seg.spans[a].0,
                j: seg.spans[b].0,
                class_id: lookup.get(&key).copied().unwrap_or(0),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{parse_standoff, SchemaMode};

    fn surfaces(t: &[Token]) -> Vec<&str> {
        t.iter().map(|t| t.surface.as_str()).collect()
    }

    #[test]
    fn tokenize_empty() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn tokenize_newline_is_a_token() {
        let t = tokenize("aspirin 500 mg\n");
        assert_eq!(surfaces(&t), ["aspirin", "500", "mg", "\n"]);
        let offs: Vec<_> = t.iter().map(|t| (t.start, t.end)).collect();
        assert_eq!(offs, [(0, 7), (8, 11), (12, 14), (14, 15)]);
    }

    #[test]
    fn tokenize_counts_words() {
        assert_eq!(tokenize("every 4 weeks from July to October").len(), 7);
    }

    #[test]
    fn tokenize_punctuation_and_accents() {
        let t = tokenize("arrêt: anti-TNF, 7.5 mg");
        assert_eq!(surfaces(&t), ["arrêt", ":", "anti", "-", "TNF", ",", "7", ".", "5", "mg"]);
        assert_eq!((t[0].start, t[0].end), (0, 5));
    }

    fn doc(text: &str, ann: &str) -> Document {
        parse_standoff("d", text, ann, &SchemaProfile::corp_hus(), SchemaMode::Strict).unwrap()
    }

    #[test]
    fn single_entity_gives_no_segment() {
        let d = doc("takes aspirin", "T1\tDrug 6 13\taspirin");
        let (segs, rep) = make_segments(&d, &WindowConfig::new(300)).unwrap();
        assert!(segs.is_empty());
        assert_eq!(rep.segments_excluded, 1);
    }

    #[test]
    fn short_doc_is_one_window() {
        let mut text = "tocilizumab IV ".to_string();
        text.push_str(&"x ".repeat(117));
        assert_eq!(text.chars().count(), 249);
        let d = doc(&text, "T1\tDrug 0 11\ttocilizumab\nT2\tRoute 12 14\tIV");
        let (segs, _) = make_segments(&d, &WindowConfig::new(300)).unwrap();
        assert_eq!(segs.len(), 1);
        assert_eq!((segs[0].window_start, segs[0].window_end), (0, 249));
    }

    #[test]
    fn windows_snap_outward() {
        let tokens = tokenize("abcdef ghijkl");
        let w = window_ranges(13, &tokens, &WindowConfig::with_stride(4, 4));
        assert_eq!(w, vec![(0, 6), (0, 13), (7, 13)]);
    }

    #[test]
    fn labels_and_heads() {
        let d = doc(
            "tocilizumab IV",
            "T1\tDrug 0 11\ttocilizumab\nT2\tRoute 12 14\tIV",
        );
        let (segs, _) = make_segments(&d, &WindowConfig::new(300)).unwrap();
        let s = &segs[0];
        let schema = SchemaProfile::corp_hus();
        assert_eq!(align_labels(s, &schema).unwrap(), vec![schema.label_id("Drug"), schema.label_id("Route")]);
        assert_eq!(s.heads(), vec![0, 1]);
    }

    #[test]
    fn multi_token_entity_shares_label() {
        let d = doc(
            "x every 4 weeks aspirin",
            "T1\tFrequency 2 15\tevery 4 weeks\nT2\tDrug 16 23\taspirin",
        );
        let (segs, _) = make_segments(&d, &WindowConfig::new(300)).unwrap();
        let schema = SchemaProfile::corp_hus();
        let labels = align_labels(&segs[0], &schema).unwrap();
        let f = schema.label_id("Frequency");
        assert_eq!(labels, vec![0, f, f, f, schema.label_id("Drug")]);
        assert_eq!(segs[0].heads(), vec![1, 4]);
    }

    #[test]
    fn overlapping_entities_are_rejected() {
        let mut d = doc("aspirin 500mg", "T1\tDrug 0 7\taspirin");
        d.entities.push(Entity { id: "T2".into(), etype: "Dosage".into(), start: 8, end: 11, surface: "500".into() });
        d.entities.push(Entity { id: "T3".into(), etype: "Dosage".into(), start: 11, end: 13, surface: "mg".into() });
        let err = make_segments(&d, &WindowConfig::new(300)).unwrap_err();
        assert_eq!(err, WindowError::OverlappingEntities("T2".into(), "T3".into()));
    }

    #[test]
    fn pair_targets_two_entities() {
        let d = doc(
            "takes aspirin",
            "T1\tDrug 6 13\taspirin\nT2\tRoute 0 5\ttakes\nR1\tRefer_to Arg1:T2 Arg2:T1",
        );
        let (segs, _) = make_segments(&d, &WindowConfig::new(300)).unwrap();
        let classes = RelationClasses::new(&SchemaProfile::corp_hus(), false);
        let t = build_pair_targets(&segs[0], &d.relations, &classes).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.iter().filter(|p| p.class_id != 0).count(), 1);
        let typed = t.iter().find(|p| p.class_id != 0).unwrap();
        assert_eq!(classes.name(typed.class_id), "Refer_to");
        assert_eq!((typed.i, typed.j), (0, 1));
    }

    #[test]
    fn pair_targets_five_entities() {
        let text = "a b c d e";
        let ann = "T1\tDrug 0 1\ta\nT2\tDosage 2 3\tb\nT3\tRoute 4 5\tc\nT4\tDate 6 7\td\nT5\tDrug 8 9\te\n\
                   R1\tRefer_to Arg1:T2 Arg2:T1\nR2\tRefer_to Arg1:T3 Arg2:T1\nR3\tStart Arg1:T4 Arg2:T5\n";
        let d = doc(text, ann);
        let (segs, _) = make_segments(&d, &WindowConfig::new(300)).unwrap();
        let classes = RelationClasses::new(&SchemaProfile::corp_hus(), false);
        let t = build_pair_targets(&segs[0], &d.relations, &classes).unwrap();
        assert_eq!(t.len(), 20);
        assert_eq!(t.iter().filter(|p| p.class_id != 0).count(), 3);
    }

    #[test]
    fn conflicting_gold_relations() {
        let d = doc(
            "takes aspirin",
            "T1\tDrug 6 13\taspirin\nT2\tRoute 0 5\ttakes\nR1\tRefer_to Arg1:T2 Arg2:T1\nR2\tStart Arg1:T2 Arg2:T1",
        );
        let (segs, _) = make_segments(&d, &WindowConfig::new(300)).unwrap();
        let classes = RelationClasses::new(&SchemaProfile::corp_hus(), false);
        assert!(matches!(
            build_pair_targets(&segs[0], &d.relations, &classes),
            Err(WindowError::ConflictingRelations { .. })
        ));
    }

    #[test]
    fn same_frame_class_only_with_augmentation() {
        let d = doc(
            "aspirin IV daily",
            "T1\tDrug 0 7\taspirin\nT2\tRoute 8 10\tIV\nT3\tFrequency 11 16\tdaily\n\
             R1\tRefer_to Arg1:T2 Arg2:T1\nR2\tRefer_to Arg1:T3 Arg2:T1\nR3\tSAME_FRAME Arg1:T2 Arg2:T3",
        );
        let (segs, _) = make_segments(&d, &WindowConfig::new(300)).unwrap();
        let schema = SchemaProfile::corp_hus();
        let off = build_pair_targets(&segs[0], &d.relations, &RelationClasses::new(&schema, false)).unwrap();
        let on_classes = RelationClasses::new(&schema, true);
        let on = build_pair_targets(&segs[0], &d.relations, &on_classes).unwrap();
        assert_eq!(off.iter().filter(|p| p.class_id != 0).count(), 2);
        assert_eq!(on.iter().filter(|p| p.class_id != 0).count(), 3);
        assert!(on.iter().any(|p| on_classes.name(p.class_id) == SAME_FRAME));
    }

    #[test]
    fn bad_stride() {
        let d = Document::new("d", "x");
        assert!(make_segments(&d, &WindowConfig::with_stride(10, 0)).is_err());
        assert!(make_segments(&d, &WindowConfig::with_stride(10, 11)).is_err());
    }
}
