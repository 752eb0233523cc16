//! Edit-based evaluation of clinician revisions of generated text.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::normalize_tokens;
use crate::error::{Error, Result};

use super::icc::{icc_2_1, Ratings};

/// Metrics for one (original, edited) pair. Percentages are on a 0–100
/// scale; edit percent exceeds 100 when the edit script is longer than the
/// original text.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EditMetrics {
    pub edit_distance_pct: f64,
    pub word_error_rate: f64,
    pub retention_pct: f64,
    pub editing_seconds: f64,
}

/// Levenshtein distance over arbitrary symbols, two-row dynamic program.
pub fn levenshtein<S: PartialEq>(a: &[S], b: &[S]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Length of the longest common subsequence.
pub fn lcs_len<S: PartialEq>(a: &[S], b: &[S]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                prev[j + 1].max(cur[j])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Character-level edit percent, word error rate and token retention of an
/// edited text against the generated original.
///
/// Retention is the longest common token subsequence as a share of the
/// original's tokens.
pub fn edit_metrics(original: &str, edited: &str, editing_seconds: f64) -> Result<EditMetrics> {
    let oc: Vec<char> = original.chars().collect();
    if oc.is_empty() {
        return Err(Error::Empty("original text is empty".into()));
    }
    let ec: Vec<char> = edited.chars().collect();
    let ot = normalize_tokens(original);
    let et = normalize_tokens(edited);
    let char_edits = levenshtein(&oc, &ec);
    let (wer, retention) = if ot.is_empty() {
        (0.0, 100.0)
    } else {
        (
            levenshtein(&ot, &et) as f64 / ot.len() as f64,
            100.0 * lcs_len(&ot, &et) as f64 / ot.len() as f64,
        )
    };
    Ok(EditMetrics {
        edit_distance_pct: 100.0 * char_edits as f64 / oc.len() as f64,
        word_error_rate: wer,
        retention_pct: retention,
        editing_seconds,
    })
}

/// One row of a clinician-evaluation file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EditRecord {
    pub case_id: String,
    pub generation: u32,
    pub original: String,
    pub edited: String,
    pub annotator: String,
    pub editing_seconds: f64,
}

/// Reads the paired-record file: one JSON object per line with the fields of
/// [`EditRecord`]. Blank lines are skipped.
pub fn load_edit_records(path: impl AsRef<Path>) -> Result<Vec<EditRecord>> {
    let text = std::fs::read_to_string(path.as_ref()).map_err(|e| Error::io(path.as_ref(), e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: EditRecord = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
            index: i,
            reason: e.to_string(),
        })?;
        out.push(rec);
    }
    if out.is_empty() {
        return Err(Error::Empty(format!("{}: no records", path.as_ref().display())));
    }
    Ok(out)
}

/// Per-generation consensus of the edit metrics plus inter-annotator ICC(2,1)
/// over (case, generation) subjects.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EditSummary {
    /// generation → mean metrics over cases of the per-case annotator consensus
    pub per_generation: BTreeMap<u32, EditMetrics>,
    pub icc_edit_distance: Option<f64>,
    pub icc_retention: Option<f64>,
}

pub fn summarize_edits(records: &[EditRecord]) -> Result<EditSummary> {
    // (generation, case) → annotator → metrics
    let mut cells: BTreeMap<(u32, &str), BTreeMap<&str, EditMetrics>> = BTreeMap::new();
    for r in records {
        let m = edit_metrics(&r.original, &r.edited, r.editing_seconds)?;
        cells
            .entry((r.generation, r.case_id.as_str()))
            .or_default()
            .insert(r.annotator.as_str(), m);
    }
    let mut sums: BTreeMap<u32, (EditMetrics, usize)> = BTreeMap::new();
    for ((gen, _), by_ann) in &cells {
        let k = by_ann.len() as f64;
        let c = by_ann.values().fold([0.0; 4], |acc, m| {
            [
                acc[0] + m.edit_distance_pct / k,
                acc[1] + m.word_error_rate / k,
                acc[2] + m.retention_pct / k,
                acc[3] + m.editing_seconds / k,
            ]
        });
        let e = sums.entry(*gen).or_insert((
            EditMetrics {
                edit_distance_pct: 0.0,
                word_error_rate: 0.0,
                retention_pct: 0.0,
                editing_seconds: 0.0,
            },
            0,
        ));
        e.0.edit_distance_pct += c[0];
        e.0.word_error_rate += c[1];
        e.0.retention_pct += c[2];
        e.0.editing_seconds += c[3];
        e.1 += 1;
    }
    let per_generation = sums
        .into_iter()
        .map(|(g, (m, n))| {
            let n = n as f64;
            (
                g,
                EditMetrics {
                    edit_distance_pct: m.edit_distance_pct / n,
                    word_error_rate: m.word_error_rate / n,
                    retention_pct: m.retention_pct / n,
                    editing_seconds: m.editing_seconds / n,
                },
            )
        })
        .collect();

    // ICC only over subjects rated by the full annotator set
    let annotators: std::collections::BTreeSet<&str> =
        records.iter().map(|r| r.annotator.as_str()).collect();
    let complete: Vec<_> = cells
        .values()
        .filter(|m| m.len() == annotators.len())
        .collect();
    let icc_of = |f: fn(&EditMetrics) -> f64| -> Option<f64> {
        if annotators.len() < 2 {
            return None;
        }
        let rows: Vec<Vec<f64>> = complete
            .iter()
            .map(|m| annotators.iter().map(|a| f(&m[a])).collect())
            .collect();
        Ratings::new(rows).ok().and_then(|r| icc_2_1(&r).ok())
    };
    Ok(EditSummary {
        per_generation,
        icc_edit_distance: icc_of(|m| m.edit_distance_pct),
        icc_retention: icc_of(|m| m.retention_pct),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_lev(a: &[char], b: &[char]) -> usize {
        if a.is_empty() {
            return b.len();
        }
        if b.is_empty() {
            return a.len();
        }
        let sub = brute_lev(&a[1..], &b[1..]) + usize::from(a[0] != b[0]);
        sub.min(brute_lev(&a[1..], b) + 1).min(brute_lev(a, &b[1..]) + 1)
    }

    #[test]
    fn kitten_sitting() {
        let m = edit_metrics("kitten", "sitting", 12.0).unwrap();
        assert_eq!(levenshtein(&['k', 'i', 't', 't', 'e', 'n'], &['s', 'i', 't', 't', 'i', 'n', 'g']), 3);
        assert!((m.edit_distance_pct - 50.0).abs() < 1e-12);
        assert_eq!(m.editing_seconds, 12.0);
    }

    #[test]
    fn identity() {
        let m = edit_metrics("Clear lungs. No effusion.", "Clear lungs. No effusion.", 0.0).unwrap();
        assert_eq!(m.edit_distance_pct, 0.0);
        assert_eq!(m.word_error_rate, 0.0);
        assert_eq!(m.retention_pct, 100.0);
    }

    #[test]
    fn empty_original_rejected() {
        assert!(edit_metrics("", "x", 0.0).is_err());
    }

    #[test]
    fn exhaustive_small_strings() {
        // every string of length ≤ 4 over {a, b} against a fixed set of probes,
        // plus sampled pairs up to length 8 over a 4-letter alphabet
        let alphabet = ['a', 'b'];
        let mut words: Vec<Vec<char>> = vec![vec![]];
        for len in 1..=4 {
            let mut next = Vec::new();
            for w in words.iter().filter(|w| w.len() == len - 1) {
                for &c in &alphabet {
                    let mut v = w.clone();
                    v.push(c);
                    next.push(v);
                }
            }
            words.extend(next);
        }
        for x in &words {
            for y in &words {
                assert_eq!(levenshtein(x, y), brute_lev(x, y));
            }
        }
        use rand::Rng;
        let mut r = crate::rng::stream(77, 0);
        let abcd = ['a', 'b', 'c', 'd'];
        for _ in 0..300 {
            let lx = r.random_range(0..=8);
            let ly = r.random_range(0..=8);
            let x: Vec<char> = (0..lx).map(|_| abcd[r.random_range(0..4)]).collect();
            let y: Vec<char> = (0..ly).map(|_| abcd[r.random_range(0..4)]).collect();
            assert_eq!(levenshtein(&x, &y), brute_lev(&x, &y));
        }
    }

    #[test]
    fn lcs_basics() {
        assert_eq!(lcs_len(&["the", "cat"], &["the", "cat", "sat"]), 2);
        assert_eq!(lcs_len::<u8>(&[], &[1]), 0);
    }

    #[test]
    fn heavy_rewrite_summary() {
        // consensus of two annotators who both rewrite most of the text
        let orig = "no acute cardiopulmonary process heart size normal lungs clear";
        let recs: Vec<EditRecord> = [("a", "moderate right pleural effusion with basilar atelectasis and mild edema"),
                                     ("b", "right effusion with basilar consolidation concerning for pneumonia and edema")]
            .iter()
            .map(|(ann, ed)| EditRecord {
                case_id: "c1".into(),
                generation: 4,
                original: orig.into(),
                edited: (*ed).into(),
                annotator: (*ann).into(),
                editing_seconds: 90.0,
            })
            .collect();
        let s = summarize_edits(&recs).unwrap();
        let g4 = s.per_generation[&4];
        assert!(g4.edit_distance_pct > 60.0);
        assert!(g4.retention_pct < 22.0);
    }
}
