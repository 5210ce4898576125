use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::windowing::Token;

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
/// `[E1]`, `[/E1]`, `[E2]`, `[/E2]` used by the baseline.
pub const MARKER_IDS: [usize; 4] = [2, 3, 4, 5];
const RESERVED: [&str; 6] = ["[PAD]", "[UNK]", "[E1]", "[/E1]", "[E2]", "[/E2]"];

/// Lowercased word inventory with reserved ids for padding, unknown words
/// and entity markers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Reserved entries followed by every distinct lowercased surface, sorted.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a Token>) -> Self {
        let distinct: BTreeSet<String> = tokens.into_iter().map(|t| t.surface.to_lowercase()).collect();
        let words: Vec<String> = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(distinct.into_iter().filter(|w| !RESERVED.contains(&w.as_str())))
            .collect();
        Vocab::from(words)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn id(&self, surface: &str) -> usize {
        self.index
            .get(&surface.to_lowercase())
            .copied()
            .unwrap_or(UNK_ID)
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn encode(&self, tokens: &[Token]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(&t.surface)).collect()
    }
}

impl From<Vec<String>> for Vocab {
    fn from(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocab { words, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.words
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::windowing::tokenize;

    #[test]
    fn reserved_ids_and_lowercasing() {
        let toks = tokenize("Aspirin aspirin 81 mg");
        let v = Vocab::build(&toks);
        assert_eq!(v.word(PAD_ID), Some("[PAD]"));
        assert_eq!(v.word(MARKER_IDS[3]), Some("[/E2]"));
        assert_eq!(v.len(), 6 + 3);
        assert_eq!(v.id("ASPIRIN"), v.id("aspirin"));
        assert_eq!(v.id("ibuprofen"), UNK_ID);
    }

    #[test]
    fn serde_roundtrip() {
        let v = Vocab::build(&tokenize("every 4 weeks"));
        let json = serde_json::to_string(&v).unwrap();
        let back: Vocab = serde_json::from_str(&json).unwrap();
        assert_eq!(back, v);
    }
}
