use rand::seq::SliceRandom;

use super::Corpus;
use crate::error::{Error, Result};
use crate::rng;

fn target_counts(n: usize, fractions: [f64; 3]) -> [usize; 3] {
    // floor, then hand out the remainder by largest fractional part (ties to
    // the earlier split)
    let raw: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts = [0usize; 3];
    for i in 0..3 {
        counts[i] = (raw[i] + 1e-9).floor() as usize;
    }
    let mut rest = n - counts.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..3).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - counts[a] as f64;
        let fb = raw[b] - counts[b] as f64;
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        counts[i] += 1;
        rest -= 1;
    }
    counts
}

/// Stratified, seeded train/validation/test partition.
///
/// Documents are grouped by the hash of their label set, shuffled within
/// each group, and dealt so every split tracks its target fraction along the
/// way; totals are exact (largest-remainder rounding).
pub fn split_corpus(corpus: &Corpus, fractions: (f64, f64, f64), seed: u64) -> Result<(Corpus, Corpus, Corpus)> {
    let fr = [fractions.0, fractions.1, fractions.2];
    if fr.iter().any(|&f| !(f > 0.0)) {
        return Err(Error::Range(format!("split fractions must be positive: {fr:?}")));
    }
    if (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Range(format!("split fractions must sum to 1: {fr:?}")));
    }
    let n = corpus.len();
    if n < 3 {
        return Err(Error::Range(format!("need at least 3 documents to split, got {n}")));
    }
    let targets = target_counts(n, fr);

    let mut keyed: Vec<(u64, usize)> = corpus
        .documents
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let key: Vec<&str> = d.labels.iter().map(String::as_str).collect();
            (rng::fnv1a(key.join("\u{1f}").as_bytes()), i)
        })
        .collect();
    keyed.sort();
    let mut r = rng::stream(seed, 0x5_9117);
    let mut order = Vec::with_capacity(n);
    let mut start = 0;
    while start < keyed.len() {
        let mut end = start;
        while end < keyed.len() && keyed[end].0 == keyed[start].0 {
            end += 1;
        }
        let mut group: Vec<usize> = keyed[start..end].iter().map(|&(_, i)| i).collect();
        group.shuffle(&mut r);
        order.extend(group);
        start = end;
    }

    let mut assigned = [0usize; 3];
    let mut parts: [Vec<usize>; 3] = Default::default();
    for (pos, &doc) in order.iter().enumerate() {
        let mut best = None;
        let mut best_deficit = f64::NEG_INFINITY;
        for s in 0..3 {
            if assigned[s] >= targets[s] {
                continue;
            }
            let deficit = targets[s] as f64 * (pos + 1) as f64 / n as f64 - assigned[s] as f64;
            if deficit > best_deficit + 1e-12 {
                best_deficit = deficit;
                best = Some(s);
            }
        }
        let s = best.expect("targets sum to n");
        assigned[s] += 1;
        parts[s].push(doc);
    }
    let build = |idx: &mut Vec<usize>| {
        idx.sort_unstable();
        Corpus::new(idx.iter().map(|&i| corpus.documents[i].clone()).collect())
    };
    let [mut a, mut b, mut c] = parts;
    Ok((build(&mut a), build(&mut b), build(&mut c)))
}
