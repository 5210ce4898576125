//! Deterministic gold corpora built from prescription-like templates.
//!
//! Every document draws from its own ChaCha8 stream (the corpus seed with the
//! document index as stream id), so generation can run in parallel and a
//! document does not depend on how many others are generated.

mod draft;
mod templates;

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{corpus_stats, save_corpus, CorpusError, CorpusStats, Document, SchemaProfile};
use crate::frames::FrameSet;
use crate::par::{self, Exec};

use draft::Draft;
use templates::Lang;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

pub type Result<T, E = SynthError> = std::result::Result<T, E>;

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Surface forms drawn for each annotated mention type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lexicon {
    pub drugs: Vec<String>,
    pub drug_classes: Vec<String>,
    pub routes: Vec<String>,
    pub frequencies: Vec<String>,
    pub dosages: Vec<String>,
    pub dates: Vec<String>,
    pub relative_dates: Vec<String>,
    pub durations: Vec<String>,
    pub conditions: Vec<String>,
    pub strengths: Vec<String>,
    pub forms: Vec<String>,
    /// Amount per intake in the English profile (`Dosage` there).
    pub doses: Vec<String>,
    pub reasons: Vec<String>,
    pub adverse_events: Vec<String>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon {
            drugs: strings(&[
                "tocilizumab", "aspirin", "metformin", "prednisone", "methotrexate", "amoxicillin",
                "paracetamol", "enoxaparin", "furosemide", "ramipril", "atorvastatin", "omeprazole",
                "insulin glargine", "levothyroxine", "bisoprolol", "hydroxychloroquine", "rituximab",
                "infliximab", "warfarin", "ceftriaxone", "vancomycin", "morphine", "tramadol",
                "amlodipine", "allopurinol", "colchicine", "azathioprine", "mycophenolate",
            ]),
            drug_classes: strings(&[
                "antibiotic therapy", "anticoagulation", "corticosteroids", "biotherapy",
                "immunosuppressant", "analgesics",
            ]),
            routes: strings(&["IV", "orally", "subcutaneously", "per os", "intramuscularly"]),
            frequencies: strings(&[
                "every 4 weeks", "every 2 weeks", "twice daily", "once daily", "every 8 hours",
                "at bedtime", "three times a day", "weekly",
            ]),
            dosages: strings(&[
                "100 mg", "500 mg", "1 g", "8 mg/kg", "20 mg", "40 mg", "2.5 mg", "75 mg", "10 units",
                "1 tablet",
            ]),
            dates: strings(&[
                "July", "October", "December", "March 2020", "12/03/2021", "January 2019",
                "05/11/2022", "June", "September 2018", "2017",
            ]),
            relative_dates: strings(&["yesterday", "last week", "two days ago", "last month", "this morning"]),
            durations: strings(&["10 days", "2 weeks", "30 minutes", "1 hour", "3 months", "6 weeks"]),
            conditions: strings(&["pain", "fever", "nausea", "insomnia", "hypertension", "flare"]),
            strengths: strings(&["500 mg", "10 mg", "0.5 mg", "81 mg", "40 mg", "1 g"]),
            forms: strings(&["tablet", "capsule", "solution", "patch", "inhaler"]),
            doses: strings(&["one tab", "2 tablets", "1 puff", "one capsule", "5 ml"]),
            reasons: strings(&["pain", "infection", "atrial fibrillation", "diabetes", "constipation"]),
            adverse_events: strings(&["rash", "hypotension", "diarrhea", "bleeding", "hyperkalemia"]),
        }
    }
}

impl Lexicon {
    fn tables(&self) -> [(&'static str, &Vec<String>); 14] {
        [
            ("drugs", &self.drugs),
            ("drug_classes", &self.drug_classes),
            ("routes", &self.routes),
            ("frequencies", &self.frequencies),
            ("dosages", &self.dosages),
            ("dates", &self.dates),
            ("relative_dates", &self.relative_dates),
            ("durations", &self.durations),
            ("conditions", &self.conditions),
            ("strengths", &self.strengths),
            ("forms", &self.forms),
            ("doses", &self.doses),
            ("reasons", &self.reasons),
            ("adverse_events", &self.adverse_events),
        ]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Profile {
    CorpHus,
    N2c2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub seed: u64,
    pub doc_count: usize,
    /// Inclusive `[min, max]` sentence count per document.
    pub sentences_per_doc: [usize; 2],
    /// Built-in profile name, `corp-hus` or `n2c2`.
    pub schema: String,
    /// Probability that a drug sentence uses the two-period template, whose
    /// drug carries two frames.
    pub multi_frame_rate: f64,
    /// Probability that a single-frame sentence carries a contextual
    /// relation (start, stop, negation, ...) rather than plain attributes.
    pub context_relation_rate: f64,
    /// Probability that a sentence mentions a drug at all.
    pub drug_sentence_rate: f64,
    /// Share of documents written with French connective words.
    pub french_rate: f64,
    pub lexicon: Lexicon,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 0,
            doc_count: 200,
            sentences_per_doc: [8, 14],
            schema: "corp-hus".into(),
            multi_frame_rate: 0.04,
            context_relation_rate: 0.65,
            drug_sentence_rate: 0.1,
            french_rate: 0.25,
            lexicon: Lexicon::default(),
        }
    }
}

impl GenConfig {
    pub(crate) fn profile(&self) -> Result<Profile> {
        match self.schema.as_str() {
            "corp-hus" => Ok(Profile::CorpHus),
            "n2c2" => Ok(Profile::N2c2),
            other => Err(SynthError::Corpus(CorpusError::UnknownProfile(other.to_string()))),
        }
    }

    pub fn schema_profile(&self) -> Result<SchemaProfile> {
        Ok(SchemaProfile::by_name(&self.schema)?)
    }

    pub fn check(&self) -> Result<()> {
        self.profile()?;
        for (name, rate) in [
            ("multi_frame_rate", self.multi_frame_rate),
            ("context_relation_rate", self.context_relation_rate),
            ("drug_sentence_rate", self.drug_sentence_rate),
            ("french_rate", self.french_rate),
        ] {
            if !(0.0..=1.0).contains(&rate) {
                return Err(SynthError::InvalidConfig(format!("{name} {rate} outside [0, 1]")));
            }
        }
        let [lo, hi] = self.sentences_per_doc;
        if lo == 0 || lo > hi {
            return Err(SynthError::InvalidConfig(format!(
                "sentences_per_doc [{lo}, {hi}] must satisfy 1 <= min <= max"
            )));
        }
        if let Some((name, _)) = self.lexicon.tables().into_iter().find(|(_, t)| t.is_empty()) {
            return Err(SynthError::InvalidConfig(format!("lexicon table {name} is empty")));
        }
        Ok(())
    }
}

/// Documents with their gold frames, in document order.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedCorpus {
    pub docs: Vec<Document>,
    pub frames: Vec<FrameSet>,
}

pub fn doc_id(index: usize) -> String {
    format!("doc{index:04}")
}

fn generate_document(cfg: &GenConfig, profile: Profile, schema: &SchemaProfile, index: usize) -> (Document, FrameSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let lang = if rng.random_bool(cfg.french_rate) {
        Lang::Fr
    } else {
        Lang::En
    };
    let [lo, hi] = cfg.sentences_per_doc;
    let n = rng.random_range(lo..=hi);
    // One drug sentence is guaranteed so that every document is trainable.
    let anchor = rng.random_range(0..n);
    let mut d = Draft::default();
    for i in 0..n {
        if i == anchor || rng.random_bool(cfg.drug_sentence_rate) {
            templates::drug_sentence(&mut d, &mut rng, cfg, profile, lang);
        } else {
            templates::filler(&mut d, &mut rng, lang);
        }
        if i + 1 < n && rng.random_bool(0.2) {
            d.newline();
        }
    }
    d.finish(&doc_id(index), schema)
}

/// Generates `cfg.doc_count` documents. The result does not depend on `exec`.
pub fn generate_corpus_with(cfg: &GenConfig, exec: Exec) -> Result<GeneratedCorpus> {
    cfg.check()?;
    let profile = cfg.profile()?;
    let schema = cfg.schema_profile()?;
    let (docs, frames) = par::map_range(exec, cfg.doc_count, |i| generate_document(cfg, profile, &schema, i))
        .into_iter()
        .unzip();
    Ok(GeneratedCorpus { docs, frames })
}

pub fn generate_corpus(cfg: &GenConfig) -> Result<GeneratedCorpus> {
    generate_corpus_with(cfg, Exec::default())
}

/// Seeded shuffle, then the first `round(fraction · n)` documents form the
/// training side. Both sides keep the original relative order.
pub fn corpus_split(corpus: &[Document], train_fraction: f64, seed: u64) -> Result<(Vec<Document>, Vec<Document>)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(SynthError::InvalidConfig(format!(
            "train_fraction {train_fraction} outside (0, 1)"
        )));
    }
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = (train_fraction * corpus.len() as f64).round() as usize;
    let mut in_train = vec![false; corpus.len()];
    for &i in &order[..n_train] {
        in_train[i] = true;
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (doc, keep) in corpus.iter().zip(in_train) {
        if keep {
            train.push(doc.clone());
        } else {
            test.push(doc.clone());
        }
    }
    Ok((train, test))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config: GenConfig,
    pub stats: CorpusStats,
}

/// Writes `.txt`/`.ann` pairs and a `manifest.json` echoing the config and
/// corpus statistics. Output bytes depend only on the inputs.
pub fn write_corpus(dir: &Path, corpus: &GeneratedCorpus, cfg: &GenConfig) -> Result<Manifest> {
    let schema = cfg.schema_profile()?;
    save_corpus(dir, &corpus.docs)?;
    let manifest = Manifest {
        seed: cfg.seed,
        config: cfg.clone(),
        stats: corpus_stats(&corpus.docs, &schema),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n";
    let path = dir.join("manifest.json");
    let tmp = dir.join(".manifest.json.tmp");
    fs::write(&tmp, json).map_err(|e| CorpusError::io(&tmp, e))?;
    fs::rename(&tmp, &path).map_err(|e| CorpusError::io(&path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{validate_document, CharIndex};
    use crate::frames::{build_frames, decode_frames, frames_to_relations};

    fn small(seed: u64) -> GenConfig {
        GenConfig {
            seed,
            doc_count: 40,
            ..GenConfig::default()
        }
    }

    #[test]
    fn empty_corpus() {
        let c = generate_corpus(&GenConfig {
            doc_count: 0,
            ..GenConfig::default()
        })
        .unwrap();
        assert!(c.docs.is_empty() && c.frames.is_empty());
    }

    #[test]
    fn documents_validate_and_offsets_match() {
        for profile in ["corp-hus", "n2c2"] {
            let cfg = GenConfig {
                schema: profile.into(),
                multi_frame_rate: 0.3,
                ..small(3)
            };
            let schema = cfg.schema_profile().unwrap();
            let c = generate_corpus(&cfg).unwrap();
            for d in &c.docs {
                assert!(validate_document(d, &schema).is_empty(), "{profile} {}", d.doc_id);
                let idx = CharIndex::new(&d.text);
                for e in &d.entities {
                    assert_eq!(idx.slice(e.start, e.end), Some(e.surface.as_str()));
                }
            }
        }
    }

    #[test]
    fn gold_frames_round_trip() {
        let cfg = GenConfig {
            multi_frame_rate: 0.3,
            ..small(5)
        };
        let schema = cfg.schema_profile().unwrap();
        let c = generate_corpus(&cfg).unwrap();
        for (d, fs) in c.docs.iter().zip(&c.frames) {
            assert_eq!(&build_frames(d, &schema), fs);
            let rels = frames_to_relations(fs, &d.entities, true);
            assert_eq!(&decode_frames(&d.doc_id, &d.entities, &rels, &schema), fs);
        }
    }

    #[test]
    fn full_multi_frame_rate_gives_two_frames_per_drug() {
        for profile in ["corp-hus", "n2c2"] {
            let cfg = GenConfig {
                schema: profile.into(),
                multi_frame_rate: 1.0,
                ..small(1)
            };
            let c = generate_corpus(&cfg).unwrap();
            for (d, fs) in c.docs.iter().zip(&c.frames) {
                let per = fs.frames_per_drug();
                let drugs = d.entities.iter().filter(|e| e.etype == "Drug").count();
                assert_eq!(per.len(), drugs);
                assert!(per.values().all(|&n| n == 2), "{profile} {}", d.doc_id);
            }
        }
    }

    #[test]
    fn zero_multi_frame_rate_has_no_multi_frame_drugs() {
        let cfg = GenConfig {
            multi_frame_rate: 0.0,
            ..small(2)
        };
        let c = generate_corpus(&cfg).unwrap();
        let stats = corpus_stats(&c.docs, &cfg.schema_profile().unwrap());
        assert_eq!(stats.multi_frame_drugs, 0);
    }

    #[test]
    fn french_documents_carry_accents() {
        let cfg = GenConfig {
            french_rate: 1.0,
            ..small(4)
        };
        let c = generate_corpus(&cfg).unwrap();
        assert!(c.docs.iter().all(|d| d.text.chars().count() < d.text.len()));
    }

    #[test]
    fn deterministic_and_exec_independent() {
        let cfg = small(9);
        let a = generate_corpus_with(&cfg, Exec::Sequential).unwrap();
        let b = generate_corpus_with(&cfg, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        let prefix = generate_corpus(&GenConfig {
            doc_count: 5,
            ..cfg.clone()
        })
        .unwrap();
        assert_eq!(prefix.docs[..], a.docs[..5]);
    }

    #[test]
    fn invalid_configs() {
        let bad = [
            GenConfig {
                multi_frame_rate: 1.5,
                ..GenConfig::default()
            },
            GenConfig {
                sentences_per_doc: [4, 2],
                ..GenConfig::default()
            },
            GenConfig {
                lexicon: Lexicon {
                    routes: vec![],
                    ..Lexicon::default()
                },
                ..GenConfig::default()
            },
        ];
        for cfg in &bad {
            assert!(matches!(generate_corpus(cfg), Err(SynthError::InvalidConfig(_))));
        }
        let unknown = GenConfig {
            schema: "nope".into(),
            ..GenConfig::default()
        };
        assert!(matches!(
            generate_corpus(&unknown),
            Err(SynthError::Corpus(CorpusError::UnknownProfile(_)))
        ));
    }

    #[test]
    fn split_half() {
        let c = generate_corpus(&GenConfig {
            doc_count: 10,
            ..GenConfig::default()
        })
        .unwrap();
        let (a, b) = corpus_split(&c.docs, 0.5, 1).unwrap();
        assert_eq!((a.len(), b.len()), (5, 5));
        assert_eq!(corpus_split(&c.docs, 0.5, 1).unwrap(), (a.clone(), b.clone()));
        let mut ids: Vec<_> = a.iter().chain(&b).map(|d| d.doc_id.clone()).collect();
        ids.sort();
        assert_eq!(ids, c.docs.iter().map(|d| d.doc_id.clone()).collect::<Vec<_>>());
        assert!(corpus_split(&c.docs, 1.0, 1).is_err());
        assert!(corpus_split(&c.docs, 0.0, 1).is_err());
    }

    #[test]
    fn write_is_reproducible() {
        let cfg = small(6);
        let c = generate_corpus(&cfg).unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        write_corpus(a.path(), &c, &cfg).unwrap();
        write_corpus(b.path(), &c, &cfg).unwrap();
        let mut names: Vec<_> = fs::read_dir(a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert_eq!(names.len(), 2 * cfg.doc_count + 1);
        for n in names {
            assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap());
        }
        let back = crate::corpus::load_corpus(a.path(), &cfg.schema_profile().unwrap(), crate::corpus::SchemaMode::Strict)
            .unwrap();
        assert_eq!(back, c.docs);
    }
}
