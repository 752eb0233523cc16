use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::corpus::normalize_tokens;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapScores {
    /// Cumulative corpus BLEU-1..4 with uniform weights and brevity penalty.
    pub bleu: [f64; 4],
    /// Mean longest-common-subsequence F1.
    pub rouge_l: f64,
    /// Candidates with no tokens (scored 0).
    pub empty_candidates: usize,
}

fn ngram_counts(toks: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    for g in toks.windows(n) {
        *m.entry(g).or_insert(0) += 1;
    }
    m
}

pub fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    for x in a {
        let mut cur = vec![0usize; b.len() + 1];
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        prev = cur;
    }
    prev[b.len()]
}

pub fn overlap_scores(candidates: &[&str], references: &[&str]) -> Result<OverlapScores> {
    if candidates.len() != references.len() {
        return Err(Error::Dimension { expected: references.len(), got: candidates.len() });
    }
    if candidates.is_empty() {
        return Err(Error::Empty("no candidate/reference pairs".into()));
    }
    let mut matched = [0usize; 4];
    let mut possible = [0usize; 4];
    let (mut cand_len, mut ref_len) = (0usize, 0usize);
    let mut rouge = 0.0;
    let mut empty = 0;
    for (c, r) in candidates.iter().zip(references) {
        let (c, r) = (normalize_tokens(c), normalize_tokens(r));
        if c.is_empty() {
            empty += 1;
        }
        cand_len += c.len();
        ref_len += r.len();
        for n in 1..=4 {
            let rc = ngram_counts(&r, n);
            for (g, k) in ngram_counts(&c, n) {
                matched[n - 1] += k.min(rc.get(g).copied().unwrap_or(0));
            }
            possible[n - 1] += c.len().saturating_sub(n - 1);
        }
        let l = lcs_len(&c, &r) as f64;
        if l > 0.0 {
            let (p, q) = (l / c.len() as f64, l / r.len() as f64);
            rouge += 2.0 * p * q / (p + q);
        }
    }
    let bp = if cand_len == 0 {
        0.0
    } else if cand_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    let mut bleu = [0.0; 4];
    let mut log_sum = 0.0;
    for n in 0..4 {
        let p = if possible[n] == 0 { 0.0 } else { matched[n] as f64 / possible[n] as f64 };
        log_sum += if p > 0.0 { p.ln() } else { f64::NEG_INFINITY };
        bleu[n] = if log_sum.is_finite() { bp * (log_sum / (n + 1) as f64).exp() } else { 0.0 };
    }
    Ok(OverlapScores { bleu, rouge_l: rouge / candidates.len() as f64, empty_candidates: empty })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identity_and_disjoint() {
        let t = "the heart size is normal today";
        let s = overlap_scores(&[t], &[t]).unwrap();
        assert_eq!(s.bleu, [1.0; 4]);
        assert_eq!(s.rouge_l, 1.0);
        let s = overlap_scores(&["alpha beta"], &["gamma delta"]).unwrap();
        assert_eq!((s.bleu, s.rouge_l), ([0.0; 4], 0.0));
    }

    #[test]
    fn short_candidate() {
        let s = overlap_scores(&["the cat"], &["the cat sat"]).unwrap();
        let bp = (1.0f64 - 1.5).exp();
        assert!((s.bleu[0] - bp).abs() < 1e-12);
        assert!((s.bleu[1] - bp).abs() < 1e-12);
        assert_eq!(s.bleu[2], 0.0);
        // LCS 2: P = 1, R = 2/3
        assert!((s.rouge_l - 0.8).abs() < 1e-12);
    }

    #[test]
    fn empty_candidate_flagged() {
        let s = overlap_scores(&["", "a b"], &["a b", "a b"]).unwrap();
        assert_eq!(s.empty_candidates, 1);
        assert!((s.rouge_l - 0.5).abs() < 1e-12);
        assert!(overlap_scores(&["a"], &[]).is_err());
    }

    fn brute_lcs(a: &[u8], b: &[u8]) -> usize {
        // longest subsequence of `a` (by subset enumeration) that is a subsequence of `b`
        let mut best = 0;
        for mask in 0u32..(1 << a.len()) {
            let sub: Vec<u8> = (0..a.len()).filter(|i| mask >> i & 1 == 1).map(|i| a[i]).collect();
            let mut it = b.iter();
            if sub.iter().all(|x| it.any(|y| y == x)) {
                best = best.max(sub.len());
            }
        }
        best
    }

    proptest! {
        #[test]
        fn lcs_matches_enumeration(a in prop::collection::vec(0u8..3, 0..9), b in prop::collection::vec(0u8..3, 0..9)) {
            prop_assert_eq!(lcs_len(&a, &b), brute_lcs(&a, &b));
        }
    }
}
