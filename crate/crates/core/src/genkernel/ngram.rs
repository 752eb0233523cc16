//! Backoff n-gram model with add-k smoothing over a fixed vocabulary.
//!
//! A context seen in training uses its own add-k distribution; an unseen
//! context backs off to its longest seen suffix. The empty context is always
//! seen, so every conditional is a proper distribution.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::corpus::{stream_tokens, Corpus, Document};
use crate::error::{Error, Result};

pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";
pub const UNK: &str = "<unk>";
pub const BOS_ID: u32 = 0;
pub const EOS_ID: u32 = 1;
pub const UNK_ID: u32 = 2;

/// Token ↔ id table. Ids 0..3 are the sentinels; corpus tokens follow in
/// lexicographic order so the table does not depend on document order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, u32>,
}

impl Vocabulary {
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut body: Vec<String> = tokens
            .into_iter()
            .map(Into::into)
            .filter(|t| t != BOS && t != EOS && t != UNK)
            .collect();
        body.sort_unstable();
        body.dedup();
        let mut all = vec![BOS.to_string(), EOS.to_string(), UNK.to_string()];
        all.extend(body);
        Self::from_list(all)
    }

    fn from_list(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Self { tokens, index }
    }

    /// Vocabulary of a corpus's kernel token streams.
    pub fn of_corpus(corpus: &Corpus) -> Self {
        Self::from_tokens(corpus.iter().flat_map(stream_tokens))
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Number of tokens a model can emit (everything but the begin sentinel).
    pub fn predictable(&self) -> usize {
        self.tokens.len() - 1
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode(&self, doc: &Document) -> Vec<u32> {
        stream_tokens(doc).iter().map(|t| self.id(t)).collect()
    }

    fn rebuild_index(&mut self) {
        *self = Self::from_list(std::mem::take(&mut self.tokens));
    }
}

/// Counts following one context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextStats {
    pub total: u32,
    /// (token, count), sorted by token id.
    pub continuations: Vec<(u32, u32)>,
}

impl ContextStats {
    pub fn count(&self, token: u32) -> u32 {
        self.continuations
            .binary_search_by_key(&token, |&(t, _)| t)
            .map(|i| self.continuations[i].1)
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NGramModel {
    order: usize,
    add_k: f64,
    vocab: Arc<Vocabulary>,
    /// `levels[j]` holds contexts of length `j`.
    levels: Vec<HashMap<Vec<u32>, ContextStats>>,
}

pub fn fit_ngram(corpus: &Corpus, order: usize, add_k: f64) -> Result<NGramModel> {
    NGramModel::fit(corpus, order, add_k, None)
}

impl NGramModel {
    /// Fits on `corpus`. With `vocab` given, out-of-table tokens count as
    /// `<unk>`; otherwise the table is built from the corpus.
    pub fn fit(
        corpus: &Corpus,
        order: usize,
        add_k: f64,
        vocab: Option<Arc<Vocabulary>>,
    ) -> Result<Self> {
        if corpus.is_empty() {
            return Err(Error::Empty("cannot fit an n-gram model on an empty corpus".into()));
        }
        if !(2..=5).contains(&order) {
            return Err(Error::Range(format!("order must be in [2,5], got {order}")));
        }
        if !(add_k > 0.0 && add_k.is_finite()) {
            return Err(Error::Range(format!("add-k must be positive, got {add_k}")));
        }
        let vocab = vocab.unwrap_or_else(|| Arc::new(Vocabulary::of_corpus(corpus)));
        let mut raw: Vec<HashMap<Vec<u32>, HashMap<u32, u32>>> = vec![HashMap::new(); order];
        for doc in corpus {
            let seq = padded(&vocab.encode(doc), order);
            for i in (order - 1)..seq.len() {
                let next = seq[i];
                for (j, level) in raw.iter_mut().enumerate() {
                    let ctx = seq[i - j..i].to_vec();
                    *level.entry(ctx).or_default().entry(next).or_default() += 1;
                }
            }
        }
        let levels = raw
            .into_iter()
            .map(|level| {
                level
                    .into_iter()
                    .map(|(ctx, conts)| {
                        let mut continuations: Vec<(u32, u32)> = conts.into_iter().collect();
                        continuations.sort_unstable();
                        let total = continuations.iter().map(|c| c.1).sum();
                        (ctx, ContextStats { total, continuations })
                    })
                    .collect()
            })
            .collect();
        Ok(Self { order, add_k, vocab, levels })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn add_k(&self) -> f64 {
        self.add_k
    }

    pub fn vocab(&self) -> &Arc<Vocabulary> {
        &self.vocab
    }

    /// Count table for contexts of length `len`.
    pub fn counts(&self, len: usize) -> &HashMap<Vec<u32>, ContextStats> {
        &self.levels[len]
    }

    /// Longest seen suffix of `history` (at most order−1 tokens) and its stats.
    pub fn context<'a>(&'a self, history: &[u32]) -> &'a ContextStats {
        let max = (self.order - 1).min(history.len());
        for len in (0..=max).rev() {
            if let Some(s) = self.levels[len].get(&history[history.len() - len..]) {
                return s;
            }
        }
        unreachable!("empty context is always present")
    }

    /// Smoothed P(token | stats) over the predictable vocabulary.
    pub fn prob_in(&self, stats: &ContextStats, token: u32) -> f64 {
        let v = self.vocab.predictable() as f64;
        (stats.count(token) as f64 + self.add_k) / (stats.total as f64 + self.add_k * v)
    }

    pub fn prob(&self, history: &[u32], token: u32) -> f64 {
        self.prob_in(self.context(history), token)
    }

    /// Sum of log P over a document's tokens and end sentinel, with count.
    pub fn log_likelihood(&self, doc: &Document) -> (f64, usize) {
        let seq = padded(&self.vocab.encode(doc), self.order);
        let mut ll = 0.0;
        for i in (self.order - 1)..seq.len() {
            ll += self.prob(&seq[..i], seq[i]).ln();
        }
        (ll, seq.len() + 1 - self.order)
    }

    /// Begin-padded history for a fresh document.
    pub fn start(&self) -> Vec<u32> {
        vec![BOS_ID; self.order - 1]
    }

    /// Serializes the model as versioned JSON.
    pub fn to_snapshot(&self) -> Result<String> {
        let snap = NGramSnapshot {
            format: SNAPSHOT_FORMAT.into(),
            version: SNAPSHOT_VERSION,
            order: self.order,
            add_k: self.add_k,
            vocabulary: self.vocab.tokens.clone(),
            levels: self
                .levels
                .iter()
                .map(|l| {
                    let mut rows: Vec<(Vec<u32>, ContextStats)> =
                        l.iter().map(|(c, s)| (c.clone(), s.clone())).collect();
                    rows.sort_unstable_by(|a, b| a.0.cmp(&b.0));
                    rows
                })
                .collect(),
        };
        Ok(serde_json::to_string(&snap)?)
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let snap: NGramSnapshot = serde_json::from_str(text)?;
        if snap.format != SNAPSHOT_FORMAT || snap.version != SNAPSHOT_VERSION {
            return Err(Error::Config(format!(
                "unsupported snapshot {} v{}",
                snap.format, snap.version
            )));
        }
        let mut vocab = Vocabulary { tokens: snap.vocabulary, index: HashMap::new() };
        vocab.rebuild_index();
        Ok(Self {
            order: snap.order,
            add_k: snap.add_k,
            vocab: Arc::new(vocab),
            levels: snap.levels.into_iter().map(|l| l.into_iter().collect()).collect(),
        })
    }
}

const SNAPSHOT_FORMAT: &str = "collapselab-ngram";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NGramSnapshot {
    format: String,
    version: u32,
    order: usize,
    add_k: f64,
    vocabulary: Vec<String>,
    levels: Vec<Vec<(Vec<u32>, ContextStats)>>,
}

fn padded(ids: &[u32], order: usize) -> Vec<u32> {
    let mut seq = vec![BOS_ID; order - 1];
    seq.extend_from_slice(ids);
    seq.push(EOS_ID);
    seq
}

/// Per-token perplexity over every scored token, end sentinels included.
pub fn model_perplexity<'a, I>(model: &NGramModel, docs: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a Document>,
{
    let (mut ll, mut n) = (0.0, 0usize);
    for d in docs {
        let (l, c) = model.log_likelihood(d);
        ll += l;
        n += c;
    }
    if n == 0 {
        return Err(Error::Empty("perplexity of an empty corpus".into()));
    }
    Ok((-ll / n as f64).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn doc(text: &str) -> Document {
        Document::from_text("d", text, Provenance::Real).unwrap()
    }

    fn corpus(texts: &[&str]) -> Corpus {
        texts.iter().map(|t| doc(t)).collect()
    }

    #[test]
    fn bigram_hand_tally() {
        let k = 0.01;
        let m = fit_ngram(&corpus(&["a b . a b ."]), 2, k).unwrap();
        // stream: <Text> a b . a b . </s>; emit-able: </s> <unk> <Text> . a b
        let v = m.vocab().predictable() as f64;
        assert_eq!(v, 6.0);
        let a = m.vocab().id("a");
        let b = m.vocab().id("b");
        assert_relative_eq!(m.prob(&[a], b), (2.0 + k) / (2.0 + k * v), max_relative = 1e-12);
    }

    #[test]
    fn single_token_unigram() {
        let m = fit_ngram(&corpus(&["x"]), 2, 0.5).unwrap();
        // unigram counts: <Text>, x, </s> once each
        let u = m.counts(0).get(&Vec::new()).unwrap();
        assert_eq!(u.total, 3);
        let x = m.vocab().id("x");
        assert_relative_eq!(m.prob_in(u, x), 1.5 / (3.0 + 0.5 * 4.0));
    }

    #[test]
    fn document_order_invariance() {
        let a = fit_ngram(&corpus(&["a b c.", "c b a.", "b b"]), 3, 0.1).unwrap();
        let b = fit_ngram(&corpus(&["b b", "c b a.", "a b c."]), 3, 0.1).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unseen_context_backs_off() {
        let m = fit_ngram(&corpus(&["a b c", "d b e"]), 3, 0.1).unwrap();
        let id = |t| m.vocab().id(t);
        // (a, b) seen; (d, c) not seen, suffix (c) seen
        assert_eq!(m.context(&[id("d"), id("c")]), m.context(&[id("c")]));
        assert_ne!(m.context(&[id("a"), id("b")]), m.context(&[id("b")]));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(fit_ngram(&Corpus::default(), 3, 0.01).is_err());
        assert!(fit_ngram(&corpus(&["a"]), 1, 0.01).is_err());
        assert!(fit_ngram(&corpus(&["a"]), 6, 0.01).is_err());
    }

    #[test]
    fn uniform_model_perplexity_is_vocab_size() {
        // add-k with huge k flattens every conditional to uniform
        let m = fit_ngram(&corpus(&["a b c d"]), 2, 1e12).unwrap();
        let v = m.vocab().predictable() as f64;
        let p = model_perplexity(&m, &corpus(&["d c b a"]).documents).unwrap();
        assert_relative_eq!(p, v, max_relative = 1e-6);
    }

    #[test]
    fn memorized_sequence_perplexity_tends_to_one() {
        let c = corpus(&["a b c d e"]);
        let m = fit_ngram(&c, 3, 1e-9).unwrap();
        let p = model_perplexity(&m, &c.documents).unwrap();
        assert!((p - 1.0).abs() < 1e-6, "{p}");
    }

    #[test]
    fn bigram_perplexity_by_hand() {
        let k = 0.1;
        let m = fit_ngram(&corpus(&["a b a b"]), 2, k).unwrap();
        // stream <Text> a b a b </s>; V (emit-able) = {</s>, <unk>, <Text>, a, b} = 5
        let v = 5.0;
        // contexts: <s>→<Text> (1), <Text>→a (1), a→b (2), b→a (1), b→</s> (1)
        let p_text = (1.0 + k) / (1.0 + k * v);
        let p_a_given_text = (1.0 + k) / (1.0 + k * v);
        let p_b_given_a = (2.0 + k) / (2.0 + k * v);
        let p_end_given_b = (1.0 + k) / (2.0 + k * v);
        let ll = p_text.ln() + p_a_given_text.ln() + p_b_given_a.ln() + p_end_given_b.ln();
        let expect = (-ll / 4.0).exp();
        let got = model_perplexity(&m, &corpus(&["a b"]).documents).unwrap();
        assert_relative_eq!(got, expect, max_relative = 1e-12);
    }

    #[test]
    fn snapshot_round_trip() {
        let m = fit_ngram(&corpus(&["a b c.", "c b a!"]), 3, 0.2).unwrap();
        let back = NGramModel::from_snapshot(&m.to_snapshot().unwrap()).unwrap();
        assert_eq!(m, back);
        assert_eq!(back.vocab().id("c"), m.vocab().id("c"));
    }

    proptest! {
        #[test]
        fn conditionals_normalize(texts in prop::collection::vec("[abcd .]{1,12}", 1..6), order in 2usize..5) {
            let docs: Vec<Document> = texts
                .iter()
                .filter(|t| !t.trim().is_empty())
                .map(|t| doc(t))
                .collect();
            prop_assume!(!docs.is_empty());
            let m = fit_ngram(&Corpus::new(docs), order, 0.05).unwrap();
            for level in 0..order {
                for stats in m.counts(level).values() {
                    let s: f64 = (1..m.vocab().len() as u32).map(|t| m.prob_in(stats, t)).sum();
                    prop_assert!((s - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
