use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{split_sentences, TermMatcher};
use crate::corpus::{normalize_tokens, Document, Lexicon};
use crate::error::{Error, Result};

/// Sparse tf·idf vectors with smoothed idf `ln((1 + N)/(1 + df)) + 1` over
/// the given population of token lists.
pub fn tfidf_vectors(population: &[Vec<String>]) -> Vec<BTreeMap<String, f64>> {
    let n = population.len() as f64;
    let mut df: HashMap<&str, usize> = HashMap::new();
    for toks in population {
        let mut seen: Vec<&str> = toks.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    population
        .iter()
        .map(|toks| {
            let mut v: BTreeMap<String, f64> = BTreeMap::new();
            for t in toks {
                *v.entry(t.clone()).or_insert(0.0) += 1.0;
            }
            for (t, w) in v.iter_mut() {
                *w *= ((1.0 + n) / (1.0 + df[t.as_str()] as f64)).ln() + 1.0;
            }
            v
        })
        .collect()
}

/// Cosine similarity of sparse vectors; 0 if either is zero.
pub fn sparse_cosine(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let dot: f64 = a.iter().filter_map(|(k, x)| b.get(k).map(|y| x * y)).sum();
    let na = a.values().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.values().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceReport {
    /// Mean over documents of the mean adjacent-sentence cosine.
    pub score: f64,
    pub documents_used: usize,
    pub skipped: usize,
}

fn doc_sentences(doc: &Document) -> Vec<Vec<String>> {
    doc.sections()
        .iter()
        .flat_map(|s| split_sentences(&s.text))
        .map(|s| normalize_tokens(&s))
        .collect()
}

/// Adjacent-sentence tf·idf cosine; idf over all sentences of the set.
/// Single-sentence documents are skipped and counted.
pub fn coherence_score(documents: &[Document]) -> Result<CoherenceReport> {
    let per_doc: Vec<Vec<Vec<String>>> = documents.iter().map(doc_sentences).collect();
    let population: Vec<Vec<String>> = per_doc.iter().flatten().cloned().collect();
    let vectors = tfidf_vectors(&population);
    let mut offset = 0;
    let mut scores = Vec::new();
    let mut skipped = 0;
    for sents in &per_doc {
        let v = &vectors[offset..offset + sents.len()];
        offset += sents.len();
        if v.len() < 2 {
            skipped += 1;
            continue;
        }
        let pairs: Vec<f64> = v.windows(2).map(|w| sparse_cosine(&w[0], &w[1])).collect();
        scores.push(pairs.iter().sum::<f64>() / pairs.len() as f64);
    }
    if scores.is_empty() {
        return Err(Error::Empty("no document has two or more sentences".into()));
    }
    Ok(CoherenceReport { score: scores.iter().sum::<f64>() / scores.len() as f64, documents_used: scores.len(), skipped })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grounding {
    pub topic_cosine: f64,
    pub term_jaccard: f64,
    /// Output medical terms also in the context / output medical terms;
    /// `None` when the output has none.
    pub medical_grounding: Option<f64>,
}

/// Top decile (at least one) of a vector's terms by weight; ties by term.
fn important_terms(v: &BTreeMap<String, f64>) -> Vec<&str> {
    let mut terms: Vec<(&str, f64)> = v.iter().map(|(k, w)| (k.as_str(), *w)).collect();
    terms.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
    let keep = terms.len().div_ceil(10);
    terms.into_iter().take(keep).map(|(k, _)| k).collect()
}

/// Grounding of each (context, output) pair; idf over all texts of all pairs.
pub fn grounding_metrics(pairs: &[(&str, &str)], lexicon: &Lexicon) -> Result<Vec<Grounding>> {
    if pairs.iter().any(|(c, o)| c.trim().is_empty() || o.trim().is_empty()) {
        return Err(Error::Empty("context and output must be non-empty".into()));
    }
    let population: Vec<Vec<String>> = pairs.iter().flat_map(|(c, o)| [normalize_tokens(c), normalize_tokens(o)]).collect();
    let vectors = tfidf_vectors(&population);
    let matcher = TermMatcher::of_lexicon(lexicon);
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(i, (c, o))| {
            let (vc, vo) = (&vectors[2 * i], &vectors[2 * i + 1]);
            let (ic, io) = (important_terms(vc), important_terms(vo));
            let inter = ic.iter().filter(|t| io.contains(t)).count();
            let union = ic.len() + io.len() - inter;
            let (tc, to) = (matcher.term_set(c), matcher.term_set(o));
            Grounding {
                topic_cosine: sparse_cosine(vc, vo),
                term_jaccard: if union == 0 { 0.0 } else { inter as f64 / union as f64 },
                medical_grounding: (!to.is_empty()).then(|| to.intersection(&tc).count() as f64 / to.len() as f64),
            }
        })
        .collect())
}
