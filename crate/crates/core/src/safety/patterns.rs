use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A versioned phrase list. Lines starting with `#` are comments, `!version`
/// sets the version, every other non-blank line is a phrase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternList {
    pub version: String,
    pub phrases: Vec<String>,
}

pub fn parse_patterns(text: &str) -> Result<PatternList> {
    let mut version = String::new();
    let mut phrases = Vec::new();
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(v) = line.strip_prefix("!version") {
            version = v.trim().to_string();
            continue;
        }
        phrases.push(line.to_lowercase());
    }
    if phrases.is_empty() {
        return Err(Error::Empty("pattern list has no phrases".into()));
    }
    Ok(PatternList { version, phrases })
}

pub fn load_patterns(path: impl AsRef<Path>) -> Result<PatternList> {
    let path = path.as_ref();
    parse_patterns(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// Parses `finding: keyword, keyword` lines.
pub fn parse_finding_keywords(text: &str) -> Result<(String, BTreeMap<String, Vec<String>>)> {
    let list = parse_patterns(text)?;
    let mut out = BTreeMap::new();
    for (i, line) in list.phrases.iter().enumerate() {
        let (name, kws) = line.split_once(':').ok_or_else(|| Error::MalformedRecord {
            index: i,
            reason: format!("expected `finding: keywords`, got {line:?}"),
        })?;
        let kws: Vec<String> = kws.split(',').map(|k| k.trim().to_string()).filter(|k| !k.is_empty()).collect();
        if kws.is_empty() {
            return Err(Error::MalformedRecord { index: i, reason: format!("no keywords for {name}") });
        }
        out.insert(name.trim().to_string(), kws);
    }
    Ok((list.version, out))
}

const FINDINGS: &str = include_str!("../../data/patterns/findings.txt");
const NEGATION: &str = include_str!("../../data/patterns/negation.txt");
const REASSURANCE: &str = include_str!("../../data/patterns/reassurance.txt");
const ARTIFACT: &str = include_str!("../../data/patterns/artifact.txt");
const NON_ACTIONABLE: &str = include_str!("../../data/patterns/non_actionable.txt");

/// Report-level phrase lists used by the safety scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyPatterns {
    pub reassurance: PatternList,
    pub artifact: PatternList,
    pub non_actionable: PatternList,
}

impl SafetyPatterns {
    pub fn builtin() -> Self {
        Self {
            reassurance: parse_patterns(REASSURANCE).expect("shipped list parses"),
            artifact: parse_patterns(ARTIFACT).expect("shipped list parses"),
            non_actionable: parse_patterns(NON_ACTIONABLE).expect("shipped list parses"),
        }
    }

    /// Version string of every list, for report headers.
    pub fn versions(&self) -> BTreeMap<&'static str, &str> {
        BTreeMap::from([
            ("reassurance", self.reassurance.version.as_str()),
            ("artifact", self.artifact.version.as_str()),
            ("non_actionable", self.non_actionable.version.as_str()),
        ])
    }
}

pub(crate) fn builtin_findings() -> (String, BTreeMap<String, Vec<String>>) {
    parse_finding_keywords(FINDINGS).expect("shipped list parses")
}

pub(crate) fn builtin_negation() -> PatternList {
    parse_patterns(NEGATION).expect("shipped list parses")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_versions_and_comments() {
        let p = parse_patterns("# c\n!version 3\nNo Acute\n\nx\n").unwrap();
        assert_eq!(p.version, "3");
        assert_eq!(p.phrases, vec!["no acute", "x"]);
        assert!(parse_patterns("# only\n").is_err());
    }

    #[test]
    fn builtin_lists_load() {
        let p = SafetyPatterns::builtin();
        assert!(p.reassurance.phrases.contains(&"no acute findings".to_string()));
        let (_, f) = builtin_findings();
        assert_eq!(f.len(), 10);
        assert!(parse_finding_keywords("a b c\n").is_err());
    }
}
