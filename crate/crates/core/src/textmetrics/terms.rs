use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_tokens, Document, Lexicon, Tier};

/// Longest-match lexicon matcher over normalized tokens.
#[derive(Debug, Clone)]
pub struct TermMatcher {
    terms: HashMap<Vec<String>, String>,
    max_len: usize,
}

/// One lexicon match: token offset, length in tokens, matched term.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TermMatch {
    pub start: usize,
    pub len: usize,
    pub term: String,
}

impl TermMatcher {
    pub fn new<'a, I: IntoIterator<Item = &'a str>>(terms: I) -> Self {
        let terms: HashMap<Vec<String>, String> = terms
            .into_iter()
            .map(|t| (normalize_tokens(t), t.to_string()))
            .filter(|(k, _)| !k.is_empty())
            .collect();
        let max_len = terms.keys().map(Vec::len).max().unwrap_or(0);
        Self { terms, max_len }
    }

    pub fn of_lexicon(lexicon: &Lexicon) -> Self {
        Self::new(lexicon.terms().into_keys())
    }

    /// Non-overlapping matches scanning left to right, longest first.
    pub fn matches(&self, tokens: &[String]) -> Vec<TermMatch> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            let hit = (1..=self.max_len.min(tokens.len() - i))
                .rev()
                .find_map(|n| self.terms.get(&tokens[i..i + n]).map(|t| (n, t)));
            match hit {
                Some((n, t)) => {
                    out.push(TermMatch { start: i, len: n, term: t.clone() });
                    i += n;
                }
                None => i += 1,
            }
        }
        out
    }

    /// Distinct matched terms of a text.
    pub fn term_set(&self, text: &str) -> BTreeSet<String> {
        self.matches(&normalize_tokens(text)).into_iter().map(|m| m.term).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedicalTermReport {
    /// Tokens covered by lexicon matches / all tokens.
    pub density: f64,
    pub unique_terms: usize,
    pub per_category_per_1000: BTreeMap<String, f64>,
    pub per_tier: BTreeMap<Tier, usize>,
}

pub fn medical_term_metrics(documents: &[Document], lexicon: &Lexicon) -> MedicalTermReport {
    let matcher = TermMatcher::of_lexicon(lexicon);
    let category_of = lexicon.terms();
    let mut covered = 0usize;
    let mut total = 0usize;
    let mut unique = BTreeSet::new();
    let mut per_category: BTreeMap<String, usize> = lexicon.categories.keys().map(|c| (c.clone(), 0)).collect();
    let mut per_tier = BTreeMap::new();
    for doc in documents {
        let toks = doc.tokens();
        total += toks.len();
        for m in matcher.matches(toks) {
            covered += m.len;
            if let Some(cat) = category_of.get(m.term.as_str()) {
                *per_category.entry(cat.to_string()).or_insert(0) += 1;
            }
            if let Some(t) = lexicon.tier(&m.term) {
                *per_tier.entry(t).or_insert(0) += 1;
            }
            unique.insert(m.term);
        }
    }
    let scale = if total == 0 { 0.0 } else { 1000.0 / total as f64 };
    MedicalTermReport {
        density: if total == 0 { 0.0 } else { covered as f64 / total as f64 },
        unique_terms: unique.len(),
        per_category_per_1000: per_category.into_iter().map(|(c, n)| (c, n as f64 * scale)).collect(),
        per_tier,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContentReport {
    pub clinical_per_1000: f64,
    pub template_per_1000: f64,
    /// Infinite when the template rate is zero.
    pub ratio: f64,
}

impl ContentReport {
    pub fn ratio_defined(&self) -> bool {
        self.ratio.is_finite()
    }
}

fn count_sequence(tokens: &[String], pattern: &[String]) -> usize {
    if pattern.is_empty() {
        return 0;
    }
    tokens.windows(pattern.len()).filter(|w| *w == pattern).count()
}

/// Clinical-instruction and template phrase rates per 1,000 words.
pub fn content_ratio(documents: &[Document], lexicon: &Lexicon) -> ContentReport {
    let clinical: Vec<Vec<String>> = lexicon.clinical_patterns.iter().map(|p| normalize_tokens(p)).collect();
    let template: Vec<Vec<String>> = lexicon.template_patterns.iter().map(|p| normalize_tokens(p)).collect();
    let (mut c, mut t, mut words) = (0usize, 0usize, 0usize);
    for doc in documents {
        let toks = doc.tokens();
        words += toks.len();
        c += clinical.iter().map(|p| count_sequence(toks, p)).sum::<usize>();
        t += template.iter().map(|p| count_sequence(toks, p)).sum::<usize>();
    }
    let scale = if words == 0 { 0.0 } else { 1000.0 / words as f64 };
    let (cr, tr) = (c as f64 * scale, t as f64 * scale);
    ContentReport { clinical_per_1000: cr, template_per_1000: tr, ratio: if tr > 0.0 { cr / tr } else { f64::INFINITY } }
}
