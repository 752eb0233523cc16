//! Decoding for the n-gram kernel.
//!
//! Per step: repetition penalty on already-emitted tokens, temperature,
//! top-k, top-p, renormalize, draw. Scores are log-probabilities. Ranking
//! ties break toward the lower token id.
//!
//! A smoothed context assigns the same probability to every token it never
//! saw, so the candidate list is stored sparsely: explicit tokens plus one
//! block of equal-score tokens taken in id order.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ngram::{NGramModel, ContextStats, BOS_ID, EOS_ID, UNK_ID};
use crate::corpus::{detokenize_stream, is_section_marker, Document, Provenance, SENTENCE_PUNCT};
use crate::error::{Error, Result};
use crate::rng;

/// Temperatures at or below this decode greedily.
pub const GREEDY_TEMPERATURE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    pub temperature: f64,
    /// `None` is unlimited.
    pub top_k: Option<usize>,
    pub top_p: f64,
    pub max_length: usize,
    pub repetition_penalty: f64,
}

impl SamplerConfig {
    /// Unconditional-generation defaults.
    pub const UNCONDITIONAL: Self = Self {
        temperature: 0.7,
        top_k: Some(50),
        top_p: 0.95,
        max_length: 256,
        repetition_penalty: 1.0,
    };

    /// Conditional-generation defaults.
    pub const CONDITIONAL: Self = Self {
        temperature: 0.8,
        top_k: Some(50),
        top_p: 0.9,
        max_length: 128,
        repetition_penalty: 1.1,
    };

    pub fn greedy() -> Self {
        Self { temperature: 0.0, ..Self::UNCONDITIONAL }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config(format!("temperature {} invalid", self.temperature)));
        }
        if self.top_k == Some(0) {
            return Err(Error::Config("top-k must be at least 1".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Config(format!("top-p {} outside (0,1]", self.top_p)));
        }
        if self.max_length == 0 {
            return Err(Error::Config("max-length must be positive".into()));
        }
        if !(self.repetition_penalty >= 1.0 && self.repetition_penalty.is_finite()) {
            return Err(Error::Config("repetition penalty must be at least 1".into()));
        }
        Ok(())
    }

    pub fn is_greedy(&self) -> bool {
        self.temperature <= GREEDY_TEMPERATURE
    }
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self::UNCONDITIONAL
    }
}

/// Truncated next-token distribution.
#[derive(Debug, Clone)]
pub struct Candidates {
    /// Ranked explicit tokens scoring above the block, with weights.
    high: Vec<(u32, f64)>,
    /// Members of the block in id order are all tokens of the universe not
    /// listed in `excluded`; `block_len` of them are kept.
    excluded: Vec<u32>,
    block_weight: f64,
    block_len: usize,
    low: Vec<(u32, f64)>,
}

impl Candidates {
    fn total(&self) -> f64 {
        self.high.iter().map(|c| c.1).sum::<f64>()
            + self.block_weight * self.block_len as f64
            + self.low.iter().map(|c| c.1).sum::<f64>()
    }

    fn len(&self) -> usize {
        self.high.len() + self.block_len + self.low.len()
    }

    /// The `j`-th block member: the `j`-th id ≥ 1 that is not excluded.
    fn block_member(&self, j: usize) -> u32 {
        let mut id = j as u32 + 1;
        for &e in &self.excluded {
            if e <= id {
                id += 1;
            } else {
                break;
            }
        }
        id
    }

    fn first(&self) -> u32 {
        self.high
            .first()
            .map(|c| c.0)
            .or_else(|| (self.block_len > 0).then(|| self.block_member(0)))
            .or_else(|| self.low.first().map(|c| c.0))
            .expect("non-empty candidate set")
    }

    /// Keeps the first `n` ranked candidates.
    fn keep(&mut self, n: usize) {
        if n <= self.high.len() {
            self.high.truncate(n);
            self.block_len = 0;
            self.low.clear();
        } else if n <= self.high.len() + self.block_len {
            self.block_len = n - self.high.len();
            self.low.clear();
        } else {
            self.low.truncate(n - self.high.len() - self.block_len);
        }
    }

    /// Keeps the shortest ranked prefix whose mass reaches `p` of the total.
    fn nucleus(&mut self, p: f64) {
        let target = p * self.total();
        let mut cum = 0.0;
        for (i, c) in self.high.iter().enumerate() {
            cum += c.1;
            if cum >= target {
                self.keep(i + 1);
                return;
            }
        }
        if self.block_len > 0 {
            let need = ((target - cum) / self.block_weight).ceil().max(1.0) as usize;
            if need <= self.block_len {
                let kept = self.high.len() + need;
                self.keep(kept);
                return;
            }
            cum += self.block_weight * self.block_len as f64;
        }
        for (i, c) in self.low.iter().enumerate() {
            cum += c.1;
            if cum >= target {
                let kept = self.high.len() + self.block_len + i + 1;
                self.keep(kept);
                return;
            }
        }
    }

    fn draw<R: Rng>(&self, r: &mut R) -> u32 {
        let mut u = r.random::<f64>() * self.total();
        for c in &self.high {
            if u < c.1 {
                return c.0;
            }
            u -= c.1;
        }
        let block_mass = self.block_weight * self.block_len as f64;
        if u < block_mass {
            let j = ((u / self.block_weight) as usize).min(self.block_len - 1);
            return self.block_member(j);
        }
        u -= block_mass;
        for c in &self.low {
            if u < c.1 {
                return c.0;
            }
            u -= c.1;
        }
        self.low
            .last()
            .map(|c| c.0)
            .or_else(|| (self.block_len > 0).then(|| self.block_member(self.block_len - 1)))
            .or_else(|| self.high.last().map(|c| c.0))
            .expect("non-empty candidate set")
    }

    /// Normalized (token, probability) pairs in rank order.
    pub fn probabilities(&self) -> Vec<(u32, f64)> {
        let z = self.total();
        let mut out: Vec<(u32, f64)> = self.high.iter().map(|&(t, w)| (t, w / z)).collect();
        out.extend((0..self.block_len).map(|j| (self.block_member(j), self.block_weight / z)));
        out.extend(self.low.iter().map(|&(t, w)| (t, w / z)));
        out
    }
}

/// Builds the truncated distribution for one step. `emitted` are the tokens
/// already generated in this document; `masked` are never eligible.
pub fn candidates(
    model: &NGramModel,
    stats: &ContextStats,
    config: &SamplerConfig,
    emitted: &BTreeSet<u32>,
    masked: &[u32],
) -> Candidates {
    let v = model.vocab().predictable() as f64;
    let denom = stats.total as f64 + model.add_k() * v;
    let base = (model.add_k() / denom).ln();
    let pen = |s: f64| if s < 0.0 { s * config.repetition_penalty } else { s / config.repetition_penalty };
    let penalize = config.repetition_penalty != 1.0;

    let mut explicit: Vec<(u32, f64)> = stats
        .continuations
        .iter()
        .filter(|(t, _)| !masked.contains(t))
        .map(|&(t, c)| {
            let s = ((c as f64 + model.add_k()) / denom).ln();
            (t, if penalize && emitted.contains(&t) { pen(s) } else { s })
        })
        .collect();
    if penalize {
        for &t in emitted {
            if !masked.contains(&t) && stats.count(t) == 0 {
                explicit.push((t, pen(base)));
            }
        }
    }
    let mut excluded: Vec<u32> = masked.to_vec();
    excluded.push(BOS_ID);
    let (mut high, mut low) = (Vec::new(), Vec::new());
    for (t, s) in explicit {
        if s == base {
            continue;
        }
        excluded.push(t);
        if s > base { high.push((t, s)) } else { low.push((t, s)) }
    }
    excluded.sort_unstable();
    excluded.dedup();
    // the block starts at id 1; BOS (id 0) is outside the universe
    excluded.retain(|&e| e != BOS_ID);
    let universe = model.vocab().len() - 1 - masked.iter().filter(|&&m| m != BOS_ID).count();
    let block_len = universe - (high.len() + low.len());
    let rank = |a: &(u32, f64), b: &(u32, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
    high.sort_unstable_by(rank);
    low.sort_unstable_by(rank);

    let t = config.temperature.max(GREEDY_TEMPERATURE);
    let top = high.first().map(|c| c.1).unwrap_or(base).max(base);
    let w = |s: f64| ((s - top) / t).exp();
    let mut c = Candidates {
        high: high.into_iter().map(|(tok, s)| (tok, w(s))).collect(),
        excluded,
        block_weight: w(base),
        block_len,
        low: low.into_iter().map(|(tok, s)| (tok, w(s))).collect(),
    };
    if config.is_greedy() {
        c.keep(1);
        return c;
    }
    if let Some(k) = config.top_k {
        c.keep(k.min(c.len()));
    }
    c.nucleus(config.top_p);
    c
}

/// Decodes continuation ids after `history` until the end sentinel or
/// `max_length` tokens. The end sentinel is withheld until at least one word
/// token has been produced; `<unk>` is never produced.
pub fn decode<R: Rng>(
    model: &NGramModel,
    history: &mut Vec<u32>,
    config: &SamplerConfig,
    r: &mut R,
) -> Vec<u32> {
    let vocab = model.vocab();
    let mut emitted: BTreeSet<u32> = history.iter().copied().filter(|&t| t != BOS_ID).collect();
    let mut out = Vec::new();
    let mut has_word = false;
    while out.len() < config.max_length {
        let masked: &[u32] = if has_word { &[UNK_ID] } else { &[EOS_ID, UNK_ID] };
        let stats = model.context(history);
        let c = candidates(model, stats, config, &emitted, masked);
        let next = if config.is_greedy() { c.first() } else { c.draw(r) };
        if next == EOS_ID {
            break;
        }
        let tok = vocab.token(next);
        if !is_section_marker(tok) && !SENTENCE_PUNCT.contains(&tok) {
            has_word = true;
        }
        emitted.insert(next);
        history.push(next);
        out.push(next);
    }
    out
}

/// Samples `n_docs` documents with provenance `Synthetic(generation)`.
/// Document `i` draws from the stream derived from `(seed, i)`.
pub fn sample_text(
    model: &NGramModel,
    config: &SamplerConfig,
    n_docs: usize,
    generation: u32,
    seed: u64,
) -> Result<Vec<Document>> {
    config.validate()?;
    (0..n_docs)
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let mut history = model.start();
            let ids = decode(model, &mut history, config, &mut r);
            let toks: Vec<&str> = ids.iter().map(|&t| model.vocab().token(t)).collect();
            let sections = detokenize_stream(&toks);
            Document::new(format!("g{generation}-{i:05}"), sections, Provenance::Synthetic(generation))
        })
        .collect()
}

/// Primes the model with the context sections and the target section marker,
/// then decodes the target section text.
pub fn conditional_generate(
    model: &NGramModel,
    context: &[(String, String)],
    target_section: &str,
    config: &SamplerConfig,
    seed: u64,
) -> Result<String> {
    config.validate()?;
    if context.iter().all(|(_, t)| t.trim().is_empty()) {
        return Err(Error::Empty("conditional generation needs a non-empty context".into()));
    }
    let ctx = Document::new("context", context.to_vec(), Provenance::Real)?;
    let mut history = model.start();
    history.extend(model.vocab().encode(&ctx));
    history.push(model.vocab().id(&crate::corpus::section_marker(target_section)));
    let mut r = rng::stream(seed, 0);
    let ids = decode(model, &mut history, config, &mut r);
    // stop at the next section marker: the target is one section
    let toks: Vec<&str> = ids
        .iter()
        .map(|&t| model.vocab().token(t))
        .take_while(|t| !is_section_marker(t))
        .collect();
    Ok(detokenize_stream(&toks)
        .into_iter()
        .map(|(_, text)| text)
        .collect::<Vec<_>>()
        .join(" "))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{normalize_tokens, Corpus};
    use crate::genkernel::fit_ngram;
    use proptest::prelude::*;

    fn corpus(texts: &[&str]) -> Corpus {
        texts
            .iter()
            .map(|t| Document::from_text("d", t, Provenance::Real).unwrap())
            .collect()
    }

    /// Dense reference: every universe token scored and ranked explicitly.
    fn dense(
        model: &NGramModel,
        stats: &ContextStats,
        config: &SamplerConfig,
        emitted: &BTreeSet<u32>,
        masked: &[u32],
    ) -> Vec<(u32, f64)> {
        let mut scored: Vec<(u32, f64)> = (1..model.vocab().len() as u32)
            .filter(|t| !masked.contains(t))
            .map(|t| {
                let mut s = model.prob_in(stats, t).ln();
                if emitted.contains(&t) {
                    s *= config.repetition_penalty;
                }
                (t, s)
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        if config.is_greedy() {
            return vec![(scored[0].0, 1.0)];
        }
        let top = scored[0].1;
        let mut w: Vec<(u32, f64)> = scored
            .iter()
            .map(|&(t, s)| (t, ((s - top) / config.temperature).exp()))
            .collect();
        if let Some(k) = config.top_k {
            w.truncate(k);
        }
        let z: f64 = w.iter().map(|c| c.1).sum();
        let mut cum = 0.0;
        let mut keep = w.len();
        for (i, c) in w.iter().enumerate() {
            cum += c.1;
            if cum >= config.top_p * z {
                keep = i + 1;
                break;
            }
        }
        w.truncate(keep);
        let z: f64 = w.iter().map(|c| c.1).sum();
        w.into_iter().map(|(t, x)| (t, x / z)).collect()
    }

    #[test]
    fn greedy_limit_and_top1_agree() {
        let m = fit_ngram(&corpus(&["a b a c a b.", "b a b c."]), 3, 0.01).unwrap();
        let g = sample_text(&m, &SamplerConfig::greedy(), 3, 1, 7).unwrap();
        let mut top1 = SamplerConfig { top_k: Some(1), top_p: 0.3, ..Default::default() };
        let k1 = sample_text(&m, &top1, 3, 1, 99).unwrap();
        assert_eq!(g.iter().map(|d| d.text()).collect::<Vec<_>>(), k1.iter().map(|d| d.text()).collect::<Vec<_>>());
        top1.temperature = 1e-7;
        let t0 = sample_text(&m, &top1, 3, 1, 5).unwrap();
        assert_eq!(g[0].text(), t0[0].text());
    }

    #[test]
    fn memorized_sequence_reproduced() {
        let m = fit_ngram(&corpus(&["a b c"]), 3, 0.01).unwrap();
        for cfg in [
            SamplerConfig::UNCONDITIONAL,
            SamplerConfig::CONDITIONAL,
            SamplerConfig { temperature: 1.0, top_k: None, top_p: 0.9, ..Default::default() },
        ] {
            for d in sample_text(&m, &cfg, 20, 1, 3).unwrap() {
                assert_eq!(d.text(), "A b c");
                assert_eq!(d.provenance, Provenance::Synthetic(1));
            }
        }
    }

    #[test]
    fn seeded_replay() {
        let m = fit_ngram(&corpus(&["a b a c a b.", "b a b c.", "c c a."]), 2, 0.5).unwrap();
        let cfg = SamplerConfig { temperature: 1.0, top_k: None, top_p: 1.0, ..Default::default() };
        let a = sample_text(&m, &cfg, 10, 2, 11).unwrap();
        let b = sample_text(&m, &cfg, 10, 2, 11).unwrap();
        let c = sample_text(&m, &cfg, 10, 2, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn conditional_point_mass() {
        let docs: Corpus = ["x", "y", "z"]
            .iter()
            .map(|v| {
                Document::new(
                    "p",
                    vec![("Context".into(), format!("dx: {v}")), ("Target".into(), format!("take {v}"))],
                    Provenance::Real,
                )
                .unwrap()
            })
            .collect();
        // order 4 so "take" still sees the value two tokens back
        let m = fit_ngram(&docs, 4, 0.001).unwrap();
        let ctx = vec![("Context".to_string(), "dx: y".to_string())];
        let out = conditional_generate(&m, &ctx, "Target", &SamplerConfig::CONDITIONAL, 4).unwrap();
        assert_eq!(normalize_tokens(&out), ["take", "y"]);
        let again = conditional_generate(&m, &ctx, "Target", &SamplerConfig::CONDITIONAL, 4).unwrap();
        assert_eq!(out, again);
        assert!(conditional_generate(&m, &[("Context".into(), " ".into())], "Target", &SamplerConfig::CONDITIONAL, 4).is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = [
            SamplerConfig { top_p: 0.0, ..Default::default() },
            SamplerConfig { top_k: Some(0), ..Default::default() },
            SamplerConfig { repetition_penalty: 0.9, ..Default::default() },
            SamplerConfig { max_length: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }

    proptest! {
        #[test]
        fn sparse_matches_dense(
            texts in prop::collection::vec("[abcdefg .]{1,16}", 1..5),
            temperature in 0.05f64..2.0,
            top_k in prop::option::of(1usize..12),
            top_p in 0.05f64..=1.0,
            penalty in prop::sample::select(vec![1.0, 1.1, 1.5]),
            history in prop::collection::vec(0usize..12, 0..4),
            emitted in prop::collection::btree_set(1u32..12, 0..4),
            mask_end in any::<bool>(),
            k in prop::sample::select(vec![0.01, 0.5, 3.0]),
        ) {
            let docs: Vec<Document> = texts
                .iter()
                .filter(|t| !t.trim().is_empty())
                .map(|t| Document::from_text("d", t, Provenance::Real).unwrap())
                .collect();
            prop_assume!(!docs.is_empty());
            let m = fit_ngram(&Corpus::new(docs), 3, k).unwrap();
            let v = m.vocab().len() as u32;
            let hist: Vec<u32> = history.iter().map(|&h| h as u32 % v).collect();
            let emitted: BTreeSet<u32> = emitted.into_iter().filter(|&t| t < v).collect();
            let masked: Vec<u32> = if mask_end { vec![EOS_ID, UNK_ID] } else { vec![UNK_ID] };
            let cfg = SamplerConfig { temperature, top_k, top_p, max_length: 10, repetition_penalty: penalty };
            let stats = m.context(&hist);
            let sparse = candidates(&m, stats, &cfg, &emitted, &masked).probabilities();
            let reference = dense(&m, stats, &cfg, &emitted, &masked);
            prop_assert_eq!(sparse.len(), reference.len());
            let total: f64 = sparse.iter().map(|c| c.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            for (a, b) in sparse.iter().zip(&reference) {
                prop_assert_eq!(a.0, b.0);
                prop_assert!((a.1 - b.1).abs() < 1e-9);
            }
        }
    }
}
