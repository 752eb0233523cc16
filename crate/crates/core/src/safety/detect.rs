use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::patterns::{builtin_findings, builtin_negation};
use crate::corpus::Document;
use crate::error::{Error, Result};

pub const DEFAULT_WINDOW: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Absent,
    Negated,
    Positive,
}

/// Keyword finding detector with a preceding-context negation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FindingDetector {
    pub keywords: BTreeMap<String, Vec<String>>,
    pub negation_cues: Vec<String>,
    /// Characters preceding a mention searched for negation cues.
    pub window: usize,
    /// Restrict detection to one section of a document.
    pub section: Option<String>,
    pub version: String,
}

impl FindingDetector {
    pub fn builtin() -> Self {
        let (version, keywords) = builtin_findings();
        let negation = builtin_negation();
        Self {
            keywords,
            negation_cues: negation.phrases,
            window: DEFAULT_WINDOW,
            section: None,
            version: format!("{version}/{}", negation.version),
        }
    }

    pub fn with_section(mut self, section: impl Into<String>) -> Self {
        self.section = Some(section.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.keywords.is_empty() {
            return Err(Error::Config("detector has no findings".into()));
        }
        if let Some((f, _)) = self.keywords.iter().find(|(_, k)| k.is_empty()) {
            return Err(Error::Config(format!("finding {f} has no keywords")));
        }
        if self.window == 0 {
            return Err(Error::Config("negation window must be positive".into()));
        }
        Ok(())
    }

    pub fn findings(&self) -> impl Iterator<Item = &str> {
        self.keywords.keys().map(String::as_str)
    }

    /// The text of `doc` the detector reads.
    pub fn report_text(&self, doc: &Document) -> String {
        match &self.section {
            Some(s) => doc.section(s).unwrap_or("").to_string(),
            None => doc.text(),
        }
    }
}

pub(crate) fn lower_chars(text: &str) -> Vec<char> {
    text.chars().map(|c| c.to_lowercase().next().unwrap_or(c)).collect()
}

/// Start positions of `phrase` in `hay`. Edges that are alphanumeric must
/// sit on word boundaries.
pub(crate) fn phrase_positions(hay: &[char], phrase: &[char]) -> Vec<usize> {
    let n = phrase.len();
    if n == 0 || n > hay.len() {
        return Vec::new();
    }
    let (first, last) = (phrase[0], phrase[n - 1]);
    (0..=hay.len() - n)
        .filter(|&i| {
            hay[i..i + n] == *phrase
                && !(first.is_alphanumeric() && i > 0 && hay[i - 1].is_alphanumeric())
                && !(last.is_alphanumeric() && i + n < hay.len() && hay[i + n].is_alphanumeric())
        })
        .collect()
}

/// Case-insensitive occurrences of `phrase` in `text`.
pub fn count_phrase(text: &str, phrase: &str) -> usize {
    phrase_positions(&lower_chars(text), &lower_chars(phrase)).len()
}

/// True if any phrase occurs in `text`.
pub fn contains_any(text: &str, phrases: &[String]) -> bool {
    let hay = lower_chars(text);
    phrases.iter().any(|p| !phrase_positions(&hay, &lower_chars(p)).is_empty())
}

/// One keyword hit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mention {
    pub finding: String,
    /// Character offsets.
    pub start: usize,
    pub end: usize,
    pub negated: bool,
}

fn segment_start(hay: &[char], start: usize) -> usize {
    let mut i = start;
    while i > 0 {
        let c = hay[i - 1];
        if matches!(c, '.' | '?' | '!') || (c == '\n' && i >= 2 && hay[i - 2] == '\n') {
            return i;
        }
        i -= 1;
    }
    0
}

/// Every keyword mention in `text` with its negation status.
pub fn mentions(text: &str, detector: &FindingDetector) -> Vec<Mention> {
    let hay = lower_chars(text);
    let cues: Vec<Vec<char>> = detector.negation_cues.iter().map(|c| lower_chars(c)).collect();
    let mut out = Vec::new();
    for (finding, keywords) in &detector.keywords {
        for kw in keywords {
            let kw = lower_chars(kw);
            for start in phrase_positions(&hay, &kw) {
                let from = segment_start(&hay, start);
                let earliest_end = start.saturating_sub(detector.window) + 1;
                let negated = cues.iter().any(|cue| {
                    phrase_positions(&hay[from..start], cue)
                        .into_iter()
                        .any(|p| from + p + cue.len() >= earliest_end)
                });
                out.push(Mention { finding: finding.clone(), start, end: start + kw.len(), negated });
            }
        }
    }
    out.sort_by(|a, b| (a.start, &a.finding).cmp(&(b.start, &b.finding)));
    out
}

/// Polarity of every detector finding in `text`: positive if any mention is
/// un-negated, negated if all mentions are negated, absent otherwise.
pub fn detect_findings(text: &str, detector: &FindingDetector) -> BTreeMap<String, Polarity> {
    let mut out: BTreeMap<String, Polarity> = detector.findings().map(|f| (f.to_string(), Polarity::Absent)).collect();
    for m in mentions(text, detector) {
        let p = if m.negated { Polarity::Negated } else { Polarity::Positive };
        let slot = out.get_mut(&m.finding).expect("detector finding");
        *slot = (*slot).max(p);
    }
    out
}

/// Findings asserted positively in `text`.
pub fn positive_findings(text: &str, detector: &FindingDetector) -> Vec<String> {
    detect_findings(text, detector)
        .into_iter()
        .filter(|(_, p)| *p == Polarity::Positive)
        .map(|(f, _)| f)
        .collect()
}
