//! Documents, corpora, lexicons and the seeded toy-population synthesizer.

mod ingest;
mod lexicon;
mod split;
mod tokenize;
mod toy;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use ingest::{ingest_documents, parse_documents, write_documents, InputFormat};
pub use lexicon::{load_lexicon, parse_lexicon, Lexicon, Tier, CONDITIONS, CRITICAL_FINDINGS};
pub use split::split_corpus;
pub use tokenize::{
    detokenize_stream, is_section_marker, normalize_tokens, section_marker, stream_tokens,
    SENTENCE_PUNCT,
};
pub use toy::{synthesize_toy_corpus, zipf_word, ToyPopulationSpec};

pub const MIN_AGE: u32 = 18;
pub const MAX_AGE: u32 = 100;

/// Where a record came from. `Synthetic(t)` marks output of the generation-`t` model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Synthetic(u32),
}

impl Provenance {
    pub fn is_real(self) -> bool {
        matches!(self, Provenance::Real)
    }
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Real => write!(f, "real"),
            Provenance::Synthetic(g) => write!(f, "synthetic:{g}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub fn parse(s: &str) -> Option<Sex> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Some(Sex::Male),
            "female" | "f" => Some(Sex::Female),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Demographics {
    pub sex: Sex,
    pub age: u32,
}

impl Demographics {
    pub fn new(sex: Sex, age: u32) -> Result<Self> {
        if !(MIN_AGE..=MAX_AGE).contains(&age) {
            return Err(Error::Range(format!(
                "age {age} outside {MIN_AGE}–{MAX_AGE}"
            )));
        }
        Ok(Self { sex, age })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Section {
    pub name: String,
    pub text: String,
}

/// A provenance-tagged text record with named sections.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    sections: Vec<Section>,
    pub provenance: Provenance,
    pub labels: BTreeSet<String>,
    pub demographics: Option<Demographics>,
    #[serde(skip)]
    tokens: OnceLock<Vec<String>>,
}

impl PartialEq for Document {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
            && self.sections == other.sections
            && self.provenance == other.provenance
            && self.labels == other.labels
            && self.demographics == other.demographics
    }
}

impl Document {
    /// Builds a document; fails unless at least one section has text.
    /// Section names must be unique.
    pub fn new(
        id: impl Into<String>,
        sections: Vec<(String, String)>,
        provenance: Provenance,
    ) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for (name, _) in &sections {
            if !seen.insert(name.clone()) {
                return Err(Error::Range(format!("duplicate section {name:?}")));
            }
        }
        if !sections.iter().any(|(_, t)| !t.trim().is_empty()) {
            return Err(Error::Empty("document has no non-empty section".into()));
        }
        Ok(Self {
            id: id.into(),
            sections: sections
                .into_iter()
                .map(|(name, text)| Section { name, text })
                .collect(),
            provenance,
            labels: BTreeSet::new(),
            demographics: None,
            tokens: OnceLock::new(),
        })
    }

    /// Single-section convenience constructor (section "Text").
    pub fn from_text(id: impl Into<String>, text: &str, provenance: Provenance) -> Result<Self> {
        Self::new(id, vec![("Text".into(), text.to_string())], provenance)
    }

    pub fn with_labels<I, S>(mut self, labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.labels = labels.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_demographics(mut self, d: Demographics) -> Self {
        self.demographics = Some(d);
        self
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = p;
        self
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn section(&self, name: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.text.as_str())
    }

    /// All section texts joined by newlines, without headers.
    pub fn text(&self) -> String {
        self.sections
            .iter()
            .map(|s| s.text.as_str())
            .collect::<Vec<_>>()
            .join("\n")
    }

    /// Normalized tokens of every section, derived on first use.
    pub fn tokens(&self) -> &[String] {
        self.tokens.get_or_init(|| {
            self.sections
                .iter()
                .flat_map(|s| normalize_tokens(&s.text))
                .collect()
        })
    }
}

/// An ordered collection of documents.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn new(documents: Vec<Document>) -> Self {
        Self { documents }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Document> {
        self.documents.iter()
    }

    pub fn token_count(&self) -> usize {
        self.documents.iter().map(|d| d.tokens().len()).sum()
    }
}

impl FromIterator<Document> for Corpus {
    fn from_iter<I: IntoIterator<Item = Document>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a Document;
    type IntoIter = std::slice::Iter<'a, Document>;
    fn into_iter(self) -> Self::IntoIter {
        self.documents.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_invariants() {
        assert!(Document::new("x", vec![("A".into(), "  ".into())], Provenance::Real).is_err());
        assert!(Document::new(
            "x",
            vec![("A".into(), "t".into()), ("A".into(), "u".into())],
            Provenance::Real
        )
        .is_err());
        assert!(Demographics::new(Sex::Male, 17).is_err());
        assert!(Demographics::new(Sex::Female, 100).is_ok());
    }

    #[test]
    fn tokens_are_lazy_and_normalized() {
        let d = Document::new(
            "x",
            vec![
                ("Findings".into(), "Small LEFT effusion, 2.5 cm.".into()),
                ("Impression".into(), "Effusion.".into()),
            ],
            Provenance::Real,
        )
        .unwrap();
        assert_eq!(d.tokens(), ["small", "left", "effusion", "2", "5", "cm", "effusion"]);
    }
}
