use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CorpusError;

/// Relation name reserved for synthesized frame-membership edges.
pub const SAME_FRAME: &str = "SAME_FRAME";

/// Catch-all entity type assigned to unknown types in lax mode.
pub const OTHER_TYPE: &str = "OTHER";

/// How unknown annotation types are handled while parsing.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SchemaMode {
    /// Unknown entity or relation types are errors.
    #[default]
    Strict,
    /// Unknown entity types become [`OTHER_TYPE`]; unknown relations are dropped.
    Lax,
}

/// Named label inventory for one annotation project.
///
/// List order is significant: entity types map to label ids `1..` (0 is the
/// outside label) and relation types map to class ids `1..` (0 is the
/// no-relation class).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaProfile {
    pub name: String,
    pub entity_types: Vec<String>,
    pub relation_types: Vec<String>,
    /// Entity types that act as drug attributes inside frames.
    pub attribute_types: Vec<String>,
    /// Entity types that trigger frames.
    pub drug_types: Vec<String>,
    /// Relation types kept at document level and never folded into frames.
    #[serde(default)]
    pub document_relation_types: Vec<String>,
}

fn owned(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

impl SchemaProfile {
    /// French rheumatology profile.
    ///
    /// The entity inventory carries both `Context` and `Condition`: the corpus
    /// description lists only `Context`, while the NER results table reports
    /// the two separately.
    pub fn corp_hus() -> Self {
        SchemaProfile {
            name: "corp-hus".into(),
            entity_types: owned(&[
                "Drug",
                "Class_of_Drug",
                "Date",
                "Relative_Date",
                "Dosage",
                "Frequency",
                "Route",
                "Duration",
                "Context",
                "Condition",
            ]),
            relation_types: owned(&[
                "Refer_to",
                "Start",
                "Stop",
                "Ongoing",
                "Duration_prescription",
                "Administration_time",
                "Increase",
                "Decrease",
                "Negation",
                "Contraindicated",
                "Hypothetical",
                "Experiencer",
                "Coref",
                "Discontinue",
            ]),
            attribute_types: owned(&[
                "Date",
                "Relative_Date",
                "Dosage",
                "Frequency",
                "Route",
                "Duration",
                "Context",
                "Condition",
            ]),
            drug_types: owned(&["Drug", "Class_of_Drug"]),
            document_relation_types: owned(&["Coref", "Discontinue"]),
        }
    }

    /// English medication/ADE profile.
    pub fn n2c2() -> Self {
        SchemaProfile {
            name: "n2c2".into(),
            entity_types: owned(&[
                "Drug", "Strength", "Form", "Dosage", "Frequency", "Route", "Duration", "Reason",
                "ADE",
            ]),
            relation_types: owned(&[
                "Strength-Drug",
                "Form-Drug",
                "Dosage-Drug",
                "Frequency-Drug",
                "Route-Drug",
                "Duration-Drug",
                "Reason-Drug",
                "ADE-Drug",
            ]),
            attribute_types: owned(&[
                "Strength", "Form", "Dosage", "Frequency", "Route", "Duration", "Reason", "ADE",
            ]),
            drug_types: owned(&["Drug"]),
            document_relation_types: vec![],
        }
    }

    pub fn builtin_names() -> &'static [&'static str] {
        &["corp-hus", "n2c2"]
    }

    /// Looks up a built-in profile by name.
    pub fn by_name(name: &str) -> Result<Self, CorpusError> {
        match name {
            "corp-hus" => Ok(Self::corp_hus()),
            "n2c2" => Ok(Self::n2c2()),
            other => Err(CorpusError::UnknownProfile(other.to_string())),
        }
    }

    /// Parses a custom profile from a TOML key-value document.
    pub fn from_toml_str(src: &str) -> Result<Self, CorpusError> {
        let profile: SchemaProfile =
            toml::from_str(src).map_err(|e| CorpusError::InvalidSchema(e.to_string()))?;
        profile.check()?;
        Ok(profile)
    }

    /// Resolves `name_or_path` as a built-in name first, then as a profile file.
    pub fn resolve(name_or_path: &str) -> Result<Self, CorpusError> {
        if let Ok(p) = Self::by_name(name_or_path) {
            return Ok(p);
        }
        let path = Path::new(name_or_path);
        if path.is_file() {
            let src = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
            return Self::from_toml_str(&src);
        }
        Err(CorpusError::UnknownProfile(name_or_path.to_string()))
    }

    /// Checks the profile's structural invariants.
    pub fn check(&self) -> Result<(), CorpusError> {
        let bad = |msg: String| Err(CorpusError::InvalidSchema(msg));
        let entities: BTreeSet<&str> = self.entity_types.iter().map(String::as_str).collect();
        if entities.len() != self.entity_types.len() {
            return bad("duplicate entity type".into());
        }
        let relations: BTreeSet<&str> = self.relation_types.iter().map(String::as_str).collect();
        if relations.len() != self.relation_types.len() {
            return bad("duplicate relation type".into());
        }
        if self.relation_types.is_empty() {
            return bad("relation_types is empty".into());
        }
        if relations.contains(SAME_FRAME) {
            return bad(format!("{SAME_FRAME} is reserved and cannot be declared"));
        }
        if entities.contains(OTHER_TYPE) {
            return bad(format!("{OTHER_TYPE} is reserved and cannot be declared"));
        }
        for t in self.attribute_types.iter().chain(&self.drug_types) {
            if !entities.contains(t.as_str()) {
                return bad(format!("{t} is not a declared entity type"));
            }
        }
        if let Some(t) = self.drug_types.iter().find(|t| self.attribute_types.contains(t)) {
            return bad(format!("{t} is both a drug type and an attribute type"));
        }
        if let Some(t) = self.document_relation_types.iter().find(|t| !relations.contains(t.as_str())) {
            return bad(format!("{t} is not a declared relation type"));
        }
        for t in self.entity_types.iter().chain(&self.relation_types) {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return bad(format!("type name {t:?} must be non-empty without whitespace"));
            }
        }
        Ok(())
    }

    pub fn has_entity_type(&self, etype: &str) -> bool {
        self.entity_types.iter().any(|t| t == etype)
    }

    pub fn has_relation_type(&self, rtype: &str) -> bool {
        self.relation_types.iter().any(|t| t == rtype)
    }

    /// Label id of an entity type; 0 is reserved for "outside".
    pub fn label_id(&self, etype: &str) -> usize {
        self.entity_types.iter().position(|t| t == etype).map_or(0, |i| i + 1)
    }

    /// Number of token labels including the outside label.
    pub fn label_count(&self) -> usize {
        self.entity_types.len() + 1
    }

    pub fn is_drug(&self, etype: &str) -> bool {
        self.drug_types.iter().any(|t| t == etype)
    }

    pub fn is_attribute(&self, etype: &str) -> bool {
        self.attribute_types.iter().any(|t| t == etype)
    }

    /// Whether a relation of this type links an attribute into a frame.
    pub fn is_frame_relation(&self, rtype: &str) -> bool {
        self.has_relation_type(rtype) && !self.document_relation_types.iter().any(|t| t == rtype)
    }
}
