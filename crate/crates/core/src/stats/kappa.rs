use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Cohen's κ between two raters' categorical calls on the same items.
pub fn cohen_kappa<L: Ord + Clone>(a: &[L], b: &[L]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::Empty("kappa needs at least one item".into()));
    }
    let n = a.len() as f64;
    let mut agree = 0usize;
    let mut ma: BTreeMap<&L, usize> = BTreeMap::new();
    let mut mb: BTreeMap<&L, usize> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        if x == y {
            agree += 1;
        }
        *ma.entry(x).or_default() += 1;
        *mb.entry(y).or_default() += 1;
    }
    let po = agree as f64 / n;
    let pe: f64 = ma
        .iter()
        .map(|(k, &ca)| ca as f64 / n * mb.get(k).copied().unwrap_or(0) as f64 / n)
        .sum();
    if (1.0 - pe).abs() < 1e-15 {
        return Err(Error::Undefined(
            "kappa undefined: both raters use a single constant category".into(),
        ));
    }
    Ok((po - pe) / (1.0 - pe))
}

/// κ from a 2×2 table `[[a, b], [c, d]]` (rows: rater A yes/no, columns: rater B yes/no).
pub fn kappa_from_table(a: f64, b: f64, c: f64, d: f64) -> Result<f64> {
    let n = a + b + c + d;
    if !(n > 0.0) {
        return Err(Error::Empty("empty contingency table".into()));
    }
    let po = (a + d) / n;
    let pe = ((a + b) * (a + c) + (c + d) * (b + d)) / (n * n);
    if (1.0 - pe).abs() < 1e-15 {
        return Err(Error::Undefined("kappa undefined: chance agreement is 1".into()));
    }
    Ok((po - pe) / (1.0 - pe))
}
