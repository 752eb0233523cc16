//! Clinical lexicons: term categories, a three-tier specificity hierarchy,
//! stopwords, and the clinical-instruction and template phrase lists.
//!
//! File layout (one entry per line, `#` comments):
//!
//! ```text
//! !version 1
//! [anatomy]
//! cornea @specific
//! optic nerve @intermediate
//! [[stopwords]]
//! the
//! [[clinical-instructions]]
//! follow up
//! [[templates]]
//! it was a pleasure
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::normalize_tokens;
use crate::error::{Error, Result};

/// The ten tracked conditions.
pub const CONDITIONS: [&str; 10] = [
    "pneumonia",
    "effusion",
    "edema",
    "atelectasis",
    "pneumothorax",
    "consolidation",
    "mass",
    "nodule",
    "fracture",
    "cardiomegaly",
];

/// The five critical findings scored by the safety stack.
pub const CRITICAL_FINDINGS: [&str; 5] =
    ["pneumothorax", "effusion", "consolidation", "edema", "cardiomegaly"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    General,
    Intermediate,
    Specific,
}

impl Tier {
    fn parse(s: &str) -> Option<Tier> {
        match s {
            "general" => Some(Tier::General),
            "intermediate" => Some(Tier::Intermediate),
            "specific" => Some(Tier::Specific),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Lexicon {
    pub version: String,
    /// category → normalized terms (space-joined tokens), in file order
    pub categories: BTreeMap<String, Vec<String>>,
    pub tiers: BTreeMap<String, Tier>,
    pub stopwords: BTreeSet<String>,
    pub clinical_patterns: Vec<String>,
    pub template_patterns: Vec<String>,
}

const BUILTIN: &str = include_str!("../../data/clinical.lex");

impl Lexicon {
    /// The lexicon shipped with the crate.
    pub fn builtin() -> Self {
        parse_lexicon(BUILTIN).expect("shipped lexicon parses")
    }

    pub fn category(&self, name: &str) -> Option<&[String]> {
        self.categories.get(name).map(Vec::as_slice)
    }

    /// Every distinct term with the first category that lists it.
    pub fn terms(&self) -> BTreeMap<&str, &str> {
        let mut out = BTreeMap::new();
        for (cat, terms) in &self.categories {
            for t in terms {
                out.entry(t.as_str()).or_insert(cat.as_str());
            }
        }
        out
    }

    pub fn tier(&self, term: &str) -> Option<Tier> {
        self.tiers.get(term).copied()
    }
}

fn normalize_phrase(s: &str) -> String {
    normalize_tokens(s).join(" ")
}

enum Block {
    None,
    Category(String),
    Stopwords,
    Clinical,
    Templates,
}

pub fn parse_lexicon(text: &str) -> Result<Lexicon> {
    let mut lex = Lexicon::default();
    let mut block = Block::None;
    // term → (tier, category) for tiered terms
    let mut tier_owner: BTreeMap<String, (Tier, String)> = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |m: String| Error::Lexicon(format!("line {}: {m}", lineno + 1));
        if let Some(v) = line.strip_prefix("!version") {
            lex.version = v.trim().to_string();
            continue;
        }
        if let Some(name) = line.strip_prefix("[[").and_then(|l| l.strip_suffix("]]")) {
            block = match name.trim() {
                "stopwords" => Block::Stopwords,
                "clinical-instructions" => Block::Clinical,
                "templates" => Block::Templates,
                other => return Err(err(format!("unknown list {other:?}"))),
            };
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim().to_string();
            lex.categories.entry(name.clone()).or_default();
            block = Block::Category(name);
            continue;
        }
        match &block {
            Block::None => return Err(err("entry outside any block".into())),
            Block::Stopwords => {
                lex.stopwords.insert(normalize_phrase(line));
            }
            Block::Clinical => lex.clinical_patterns.push(normalize_phrase(line)),
            Block::Templates => lex.template_patterns.push(normalize_phrase(line)),
            Block::Category(cat) => {
                let (term, tier) = match line.rsplit_once('@') {
                    Some((t, tier)) => {
                        let tier = Tier::parse(tier.trim())
                            .ok_or_else(|| err(format!("unknown tier {:?}", tier.trim())))?;
                        (normalize_phrase(t), Some(tier))
                    }
                    None => (normalize_phrase(line), None),
                };
                if term.is_empty() {
                    return Err(err("empty term".into()));
                }
                if let Some(tier) = tier {
                    if let Some((prev_tier, prev_cat)) = tier_owner.get(&term) {
                        return Err(err(format!(
                            "tiered term {term:?} already listed in [{prev_cat}] as {prev_tier:?}"
                        )));
                    }
                    tier_owner.insert(term.clone(), (tier, cat.clone()));
                    lex.tiers.insert(term.clone(), tier);
                }
                let terms = lex.categories.get_mut(cat).expect("category exists");
                if !terms.contains(&term) {
                    terms.push(term);
                }
            }
        }
    }
    if lex.categories.is_empty() || lex.categories.values().all(Vec::is_empty) {
        return Err(Error::Lexicon("lexicon has no categories".into()));
    }
    Ok(lex)
}

pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lexicon(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn category_lookup() {
        let lex = parse_lexicon("[anatomy]\nCornea\n").unwrap();
        assert_eq!(lex.category("anatomy").unwrap(), ["cornea"]);
    }

    #[test]
    fn shipped_conditions() {
        let lex = Lexicon::builtin();
        let got: BTreeSet<&str> = lex.category("conditions").unwrap().iter().map(String::as_str).collect();
        let want: BTreeSet<&str> = CONDITIONS.into_iter().collect();
        assert_eq!(got, want);
        assert!(!lex.clinical_patterns.is_empty());
        assert!(!lex.template_patterns.is_empty());
        assert!(lex.stopwords.contains("the"));
    }

    #[test]
    fn term_in_two_tiers_rejected() {
        let text = "[anatomy]\ncornea @general\ncornea @specific\n";
        assert!(matches!(parse_lexicon(text), Err(Error::Lexicon(_))));
        let across = "[anatomy]\ncornea @general\n[diagnoses]\ncornea @general\n";
        assert!(parse_lexicon(across).is_err());
        // untiered duplicates across categories are fine
        assert!(parse_lexicon("[a]\nx\n[b]\nx\n").is_ok());
    }

    #[test]
    fn malformed() {
        assert!(parse_lexicon("cornea\n").is_err());
        assert!(parse_lexicon("[a]\nx @bogus\n").is_err());
        assert!(parse_lexicon("[[stopwords]]\nthe\n").is_err());
    }
}
