use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::split_sentences;
use crate::corpus::{normalize_tokens, Document};
use crate::error::{Error, Result};
use crate::stats::{mean, sample_sd};

/// Repetition rate is the fraction of distinct n-grams occurring more than
/// once; n-grams never cross document boundaries.
pub const REPETITION_DEFINITION: &str = "distinct n-grams with count > 1 / distinct n-grams";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexicalReport {
    pub ttr: f64,
    pub total_tokens: usize,
    pub distinct_tokens: usize,
    /// Distinct tokens outside the stopword list.
    pub vocabulary_size: usize,
    /// Indexed by n − 1 for n = 1, 2, 3.
    pub repetition: [f64; 3],
    pub mean_length: f64,
    pub sd_length: f64,
    pub uniqueness: f64,
    pub top_opening_share: f64,
}

/// Fraction of distinct n-grams that occur more than once across `docs`.
pub fn repetition_rate(docs: &[Vec<String>], n: usize) -> f64 {
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    for d in docs {
        for g in d.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    if counts.is_empty() {
        return 0.0;
    }
    counts.values().filter(|&&c| c > 1).count() as f64 / counts.len() as f64
}

/// Share of the most frequent sentence-opening trigram among sentences with
/// at least three words.
pub fn top_opening_share(documents: &[Document]) -> f64 {
    let mut counts: HashMap<Vec<String>, usize> = HashMap::new();
    let mut total = 0usize;
    for doc in documents {
        for s in doc.sections().iter().flat_map(|s| split_sentences(&s.text)) {
            let toks = normalize_tokens(&s);
            if toks.len() >= 3 {
                *counts.entry(toks[..3].to_vec()).or_insert(0) += 1;
                total += 1;
            }
        }
    }
    match counts.values().max() {
        Some(&m) => m as f64 / total as f64,
        None => 0.0,
    }
}

pub fn lexical_profile(documents: &[Document], stopwords: &BTreeSet<String>) -> Result<LexicalReport> {
    let tokens: Vec<Vec<String>> = documents.iter().map(|d| d.tokens().to_vec()).collect();
    let total: usize = tokens.iter().map(Vec::len).sum();
    if total == 0 {
        return Err(Error::Empty("no tokens in any document".into()));
    }
    let distinct: BTreeSet<&str> = tokens.iter().flatten().map(String::as_str).collect();
    let lengths: Vec<f64> = tokens.iter().map(|t| t.len() as f64).collect();
    let texts: BTreeSet<String> = documents.iter().map(|d| d.text().trim().to_string()).collect();
    Ok(LexicalReport {
        ttr: distinct.len() as f64 / total as f64,
        total_tokens: total,
        distinct_tokens: distinct.len(),
        vocabulary_size: distinct.iter().filter(|t| !stopwords.contains(**t)).count(),
        repetition: [1, 2, 3].map(|n| repetition_rate(&tokens, n)),
        mean_length: mean(&lengths),
        sd_length: if lengths.len() > 1 { sample_sd(&lengths) } else { 0.0 },
        uniqueness: texts.len() as f64 / documents.len() as f64,
        top_opening_share: top_opening_share(documents),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;
    use proptest::prelude::*;

    fn doc(t: &str) -> Document {
        Document::from_text("d", t, Provenance::Real).unwrap()
    }

    #[test]
    fn abab() {
        let r = lexical_profile(&[doc("a b a b")], &BTreeSet::new()).unwrap();
        assert_eq!(r.ttr, 0.5);
        assert_eq!(r.repetition[0], 1.0);
        // bigrams ab, ba, ab: "ab" repeats, "ba" does not
        assert_eq!(r.repetition[1], 0.5);
        assert_eq!(r.repetition[2], 0.0);
    }

    #[test]
    fn duplicates_and_stopwords() {
        let docs = vec![doc("The lungs are clear."); 3];
        let stop: BTreeSet<String> = ["the", "are"].iter().map(|s| s.to_string()).collect();
        let r = lexical_profile(&docs, &stop).unwrap();
        assert!((r.uniqueness - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.vocabulary_size, 2);
        assert_eq!(r.top_opening_share, 1.0);
        assert_eq!((r.mean_length, r.sd_length), (4.0, 0.0));
    }

    #[test]
    fn empty_rejected() {
        assert!(lexical_profile(&[doc("...")], &BTreeSet::new()).is_err());
        assert!(lexical_profile(&[], &BTreeSet::new()).is_err());
    }

    fn brute_repetition(tokens: &[String], n: usize) -> f64 {
        let grams: Vec<&[String]> = tokens.windows(n).collect();
        let mut distinct: Vec<&[String]> = Vec::new();
        for g in &grams {
            if !distinct.contains(g) {
                distinct.push(g);
            }
        }
        if distinct.is_empty() {
            return 0.0;
        }
        let repeated = distinct.iter().filter(|d| grams.iter().filter(|g| *g == *d).count() > 1).count();
        repeated as f64 / distinct.len() as f64
    }

    proptest! {
        #[test]
        fn repetition_matches_multiset(words in prop::collection::vec(0u8..12, 200)) {
            let toks: Vec<String> = words.iter().map(|w| format!("w{w}")).collect();
            for n in 1..=3 {
                prop_assert_eq!(repetition_rate(&[toks.clone()], n), brute_repetition(&toks, n));
            }
            let r = lexical_profile(&[doc(&toks.join(" "))], &BTreeSet::new()).unwrap();
            prop_assert_eq!(r.ttr * r.total_tokens as f64, r.distinct_tokens as f64);
            prop_assert!(r.ttr <= 1.0);
        }

        #[test]
        fn permutation_invariant(texts in prop::collection::vec("[a-d ]{1,12}[a-d]", 1..8), seed in 0u64..100) {
            use rand::seq::SliceRandom;
            let docs: Vec<Document> = texts.iter().map(|t| doc(t)).collect();
            let mut shuffled = docs.clone();
            shuffled.shuffle(&mut crate::rng::stream(seed, 0));
            let mut a = lexical_profile(&docs, &BTreeSet::new()).unwrap();
            let mut b = lexical_profile(&shuffled, &BTreeSet::new()).unwrap();
            prop_assert!((a.sd_length - b.sd_length).abs() < 1e-12);
            a.sd_length = 0.0;
            b.sd_length = 0.0;
            prop_assert_eq!(a, b);
        }
    }
}
