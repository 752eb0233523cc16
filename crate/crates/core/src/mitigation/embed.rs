//! Hashed bag-of-n-grams document embeddings with IDF weighting.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::rng::fnv1a;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EmbedderSpec {
    /// Token n-grams of length 1..=`max_n` hashed into `dim` buckets and
    /// weighted by tf·idf over the embedded batch.
    HashedNgrams { dim: usize, max_n: usize },
    /// Precomputed vectors keyed by document id, one `id,v0,v1,...` row each.
    ExternalVectors { path: String },
}

impl Default for EmbedderSpec {
    fn default() -> Self {
        EmbedderSpec::HashedNgrams { dim: 256, max_n: 2 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embeddings {
    pub vectors: Vec<Vec<f64>>,
    /// Indices of documents that produced no n-grams (zero vectors).
    pub empty: Vec<usize>,
}

fn ngrams(tokens: &[String], max_n: usize) -> Vec<String> {
    let mut out = Vec::new();
    for n in 1..=max_n {
        for w in tokens.windows(n) {
            out.push(w.join(" "));
        }
    }
    out
}

pub fn bucket(gram: &str, dim: usize) -> usize {
    (fnv1a(gram.as_bytes()) % dim as u64) as usize
}

/// Embeds documents as unit vectors; documents without tokens map to zero.
pub fn embed_documents(docs: &[&Document], spec: &EmbedderSpec) -> Result<Embeddings> {
    if docs.is_empty() {
        return Err(Error::Empty("no documents to embed".into()));
    }
    match spec {
        EmbedderSpec::HashedNgrams { dim, max_n } => {
            if *dim == 0 || *max_n == 0 {
                return Err(Error::Config("embedder dim and max_n must be positive".into()));
            }
            let grams: Vec<Vec<String>> = docs.iter().map(|d| ngrams(d.tokens(), *max_n)).collect();
            let mut df = vec![0usize; *dim];
            for g in &grams {
                let buckets: HashSet<usize> = g.iter().map(|s| bucket(s, *dim)).collect();
                for b in buckets {
                    df[b] += 1;
                }
            }
            let n = docs.len() as f64;
            let idf: Vec<f64> = df.iter().map(|&c| ((1.0 + n) / (1.0 + c as f64)).ln() + 1.0).collect();
            let mut empty = Vec::new();
            let vectors = grams
                .iter()
                .enumerate()
                .map(|(i, g)| {
                    let mut v = vec![0.0; *dim];
                    for s in g {
                        v[bucket(s, *dim)] += 1.0;
                    }
                    v.iter_mut().zip(&idf).for_each(|(x, w)| *x *= w);
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 0.0 {
                        v.iter_mut().for_each(|x| *x /= norm);
                    } else {
                        empty.push(i);
                    }
                    v
                })
                .collect();
            Ok(Embeddings { vectors, empty })
        }
        EmbedderSpec::ExternalVectors { path } => load_external(docs, Path::new(path)),
    }
}

fn load_external(docs: &[&Document], path: &Path) -> Result<Embeddings> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut table = std::collections::HashMap::new();
    let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        let v = row
            .iter()
            .skip(1)
            .map(|x| x.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<f64>, _>>()
            .map_err(|e| Error::MalformedRecord { index: i, reason: e.to_string() })?;
        table.insert(row[0].to_string(), v);
    }
    let mut empty = Vec::new();
    let vectors = docs
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let mut v = table
                .get(&d.id)
                .cloned()
                .ok_or_else(|| Error::MalformedRecord { index: i, reason: format!("no vector for {:?}", d.id) })?;
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                v.iter_mut().for_each(|x| *x /= norm);
            } else {
                empty.push(i);
            }
            Ok(v)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Embeddings { vectors, empty })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;
    use crate::mitigation::cosine_distance;

    fn doc(t: &str) -> Document {
        Document::from_text("d", t, Provenance::Real).unwrap()
    }

    #[test]
    fn identical_docs_identical_vectors() {
        let a = doc("left lower lobe opacity.");
        let b = doc("left lower lobe opacity.");
        let e = embed_documents(&[&a, &b], &EmbedderSpec::default()).unwrap();
        assert_eq!(e.vectors[0], e.vectors[1]);
        assert!(cosine_distance(&e.vectors[0], &e.vectors[1]).abs() < 1e-12);
        let norm: f64 = e.vectors[0].iter().map(|x| x * x).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disjoint_docs_are_orthogonal() {
        let a = doc("heart size normal");
        let b = doc("small left effusion");
        let spec = EmbedderSpec::default();
        let ba: HashSet<usize> = ngrams(a.tokens(), 2).iter().map(|g| bucket(g, 256)).collect();
        let bb: HashSet<usize> = ngrams(b.tokens(), 2).iter().map(|g| bucket(g, 256)).collect();
        assert!(ba.is_disjoint(&bb), "fixture has a hash collision");
        let e = embed_documents(&[&a, &b], &spec).unwrap();
        assert!((cosine_distance(&e.vectors[0], &e.vectors[1]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unigram_bag_ignores_sentence_order() {
        let a = doc("No effusion. Heart normal.");
        let b = doc("Heart normal. No effusion.");
        let spec = EmbedderSpec::HashedNgrams { dim: 64, max_n: 1 };
        let e = embed_documents(&[&a, &b], &spec).unwrap();
        assert_eq!(e.vectors[0], e.vectors[1]);
    }

    #[test]
    fn punctuation_only_document_is_flagged() {
        let a = doc("...");
        let b = doc("clear lungs");
        let e = embed_documents(&[&a, &b], &EmbedderSpec::default()).unwrap();
        assert_eq!(e.empty, [0]);
        assert!(e.vectors[0].iter().all(|&x| x == 0.0));
    }
}
