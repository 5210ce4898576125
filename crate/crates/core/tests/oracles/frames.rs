use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use regimen::corpus::{Document, Entity, Relation, SchemaProfile, SAME_FRAME};
use regimen::frames::{Frame, FrameSet, Link};

/// A random frame set over fresh entities, in canonical order.
///
/// Drugs with several frames chain them: consecutive frames may share
/// attributes (a route, a boundary date), non-consecutive ones never do, and
/// each frame keeps at least two attributes of its own. A shared attribute
/// carries the same link types in every frame it belongs to. These are the
/// frame sets a complete-graph encoding can represent.
pub fn random_frameset<R: Rng>(rng: &mut R, doc_id: &str) -> (Vec<Entity>, FrameSet) {
    let schema = SchemaProfile::corp_hus();
    let frame_types: Vec<&str> = schema
        .relation_types
        .iter()
        .map(String::as_str)
        .filter(|t| schema.is_frame_relation(t))
        .collect();
    let mut kinds: Vec<&str> = Vec::new();
    let new_entity = |kinds: &mut Vec<&str>, etype: &'static str| {
        kinds.push(etype);
        format!("T{}", kinds.len())
    };
    let attr_types: Vec<&'static str> = ["Date", "Relative_Date", "Dosage", "Frequency", "Route", "Duration", "Context", "Condition"].to_vec();
    let mut frames = Vec::new();
    for _ in 0..rng.random_range(1..=3) {
        let drug = new_entity(&mut kinds, if rng.random_bool(0.8) { "Drug" } else { "Class_of_Drug" });
        let attribute = |rng: &mut R, kinds: &mut Vec<&str>| {
            let id = new_entity(kinds, attr_types.choose(rng).unwrap());
            let n = rng.random_range(1..=2);
            let types: BTreeSet<&str> = (0..n).map(|_| *frame_types.choose(rng).unwrap()).collect();
            (id, types)
        };
        let k = match rng.random_range(0..20) {
            0..=9 => 1,
            10..=16 => 2,
            _ => 3,
        };
        let groups: Vec<Vec<(String, BTreeSet<&str>)>> = if k == 1 {
            vec![(0..rng.random_range(0..=5)).map(|_| attribute(rng, &mut kinds)).collect()]
        } else {
            let shared: Vec<Vec<_>> = (0..k - 1)
                .map(|_| (0..rng.random_range(0..=2)).map(|_| attribute(rng, &mut kinds)).collect())
                .collect();
            (0..k)
                .map(|i| {
                    let mut g: Vec<_> = (0..rng.random_range(2..=3)).map(|_| attribute(rng, &mut kinds)).collect();
                    if i > 0 {
                        g.extend(shared[i - 1].iter().cloned());
                    }
                    if i + 1 < k {
                        g.extend(shared[i].iter().cloned());
                    }
                    g
                })
                .collect()
        };
        for g in groups {
            let links = g
                .iter()
                .flat_map(|(a, ts)| {
                    ts.iter().map(move |t| Link {
                        attribute: a.clone(),
                        rtype: t.to_string(),
                    })
                })
                .collect();
            frames.push(Frame {
                drug: drug.clone(),
                links,
            });
        }
    }
    let mut slots: Vec<usize> = (0..kinds.len()).collect();
    slots.shuffle(rng);
    let entities: Vec<Entity> = kinds
        .iter()
        .zip(slots)
        .enumerate()
        .map(|(k, (etype, slot))| Entity {
            id: format!("T{}", k + 1),
            etype: etype.to_string(),
            start: slot * 10,
            end: slot * 10 + 6,
            surface: String::new(),
        })
        .collect();
    let mut fs = FrameSet {
        doc_id: doc_id.to_string(),
        frames,
    };
    fs.canonicalize(&entities);
    (entities, fs)
}

/// "treatment with tocilizumab IV every 4 weeks from July to October, then
/// every 2 weeks until December": two frames sharing the route and October.
pub fn tocilizumab() -> Document {
    let text = "treatment with tocilizumab IV every 4 weeks from July to October, then every 2 weeks until December";
    let mut d = Document::new("tocilizumab", text);
    for (id, etype, s) in [
        ("T1", "Drug", "tocilizumab"),
        ("T2", "Route", "IV"),
        ("T3", "Frequency", "every 4 weeks"),
        ("T4", "Date", "July"),
        ("T5", "Date", "October"),
        ("T6", "Frequency", "every 2 weeks"),
        ("T7", "Date", "December"),
    ] {
        let start = text[..text.find(s).unwrap()].chars().count();
        d.entities.push(Entity {
            id: id.into(),
            etype: etype.into(),
            start,
            end: start + s.chars().count(),
            surface: s.into(),
        });
    }
    let mut rel = |rtype: &str, s: &str, t: &str| {
        let id = format!("R{}", d.relations.len() + 1);
        d.relations.push(Relation {
            id,
            rtype: rtype.into(),
            source: s.into(),
            target: t.into(),
        });
    };
    for (rtype, s) in [
        ("Refer_to", "T2"),
        ("Refer_to", "T3"),
        ("Start", "T4"),
        ("Refer_to", "T5"),
        ("Refer_to", "T6"),
        ("Stop", "T7"),
    ] {
        rel(rtype, s, "T1");
    }
    for (s, t) in [
        ("T2", "T3"),
        ("T2", "T4"),
        ("T2", "T5"),
        ("T3", "T4"),
        ("T3", "T5"),
        ("T4", "T5"),
        ("T2", "T6"),
        ("T2", "T7"),
        ("T5", "T6"),
        ("T5", "T7"),
        ("T6", "T7"),
    ] {
        rel(SAME_FRAME, s, t);
    }
    d
}
