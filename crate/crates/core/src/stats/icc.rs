use crate::error::{Error, Result};
use crate::scalar::Real;

/// An n-subjects × k-raters table of ratings with no missing cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Ratings<T> {
    rows: Vec<Vec<T>>,
    raters: usize,
}

impl<T: Real> Ratings<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::Range(format!("need at least 2 subjects, got {}", rows.len())));
        }
        let k = rows[0].len();
        if k < 2 {
            return Err(Error::Range(format!("need at least 2 raters, got {k}")));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != k {
                return Err(Error::MalformedRecord {
                    index: i,
                    reason: format!("expected {k} ratings, found {}", r.len()),
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::MalformedRecord {
                    index: i,
                    reason: "missing or non-finite rating".into(),
                });
            }
        }
        Ok(Self { rows, raters: k })
    }

    pub fn subjects(&self) -> usize {
        self.rows.len()
    }

    pub fn raters(&self) -> usize {
        self.raters
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.rows
    }
}

/// Conventional reading of an ICC value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IccTier {
    Poor,
    Fair,
    Good,
    Excellent,
}

impl IccTier {
    pub fn classify(icc: f64) -> Self {
        if icc >= 0.75 {
            IccTier::Excellent
        } else if icc >= 0.60 {
            IccTier::Good
        } else if icc >= 0.40 {
            IccTier::Fair
        } else {
            IccTier::Poor
        }
    }
}

/// ICC(2,1): two-way random effects, absolute agreement, single rater.
///
/// (MS_R − MS_E) / (MS_R + (k−1)·MS_E + (k/n)·(MS_C − MS_E))
pub fn icc_2_1<T: Real>(ratings: &Ratings<T>) -> Result<T> {
    let n = ratings.subjects();
    let k = ratings.raters();
    let nf = T::from_usize_lossy(n);
    let kf = T::from_usize_lossy(k);
    let grand = ratings.rows.iter().flatten().copied().sum::<T>() / (nf * kf);

    let mut ss_rows = T::zero();
    for r in &ratings.rows {
        let m = r.iter().copied().sum::<T>() / kf;
        ss_rows += (m - grand) * (m - grand);
    }
    ss_rows *= kf;

    let mut ss_cols = T::zero();
    for j in 0..k {
        let m = ratings.rows.iter().map(|r| r[j]).sum::<T>() / nf;
        ss_cols += (m - grand) * (m - grand);
    }
    ss_cols *= nf;

    let ss_total: T = ratings
        .rows
        .iter()
        .flatten()
        .map(|&x| (x - grand) * (x - grand))
        .sum();
    if ss_total == T::zero() {
        return Err(Error::Undefined("ICC undefined: zero total variance".into()));
    }
    let ss_err = (ss_total - ss_rows - ss_cols).max(T::zero());

    let one = T::one();
    let ms_r = ss_rows / (nf - one);
    let ms_c = ss_cols / (kf - one);
    let ms_e = ss_err / ((nf - one) * (kf - one));
    let denom = ms_r + (kf - one) * ms_e + kf / nf * (ms_c - ms_e);
    if denom == T::zero() {
        return Err(Error::Undefined("ICC undefined: zero denominator".into()));
    }
    Ok((ms_r - ms_e) / denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn r(rows: &[[f64; 2]]) -> Ratings<f64> {
        Ratings::new(rows.iter().map(|x| x.to_vec()).collect()).unwrap()
    }

    #[test]
    fn perfect_agreement() {
        let m = r(&[[1.0, 1.0], [3.0, 3.0], [7.0, 7.0]]);
        assert!((icc_2_1(&m).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hand_anova_fixture() {
        // grand 7; row means 8.5 5.5 7 7 → SSR 9, MSR 3
        // col means 7.5 6.5 → SSC 2, MSC 2; SST 12 → SSE 1, MSE 1/3
        // ICC = (3 − 1/3) / (3 + 1/3 + ½(2 − 1/3)) = 16/25
        let m = r(&[[9.0, 8.0], [6.0, 5.0], [8.0, 6.0], [7.0, 7.0]]);
        assert!((icc_2_1(&m).unwrap() - 0.64).abs() < 1e-12);
    }

    #[test]
    fn tiers() {
        assert_eq!(IccTier::classify(0.705), IccTier::Good);
        assert_eq!(IccTier::classify(0.747), IccTier::Good);
        assert_eq!(IccTier::classify(0.75), IccTier::Excellent);
        assert_eq!(IccTier::classify(0.5), IccTier::Fair);
        assert_eq!(IccTier::classify(0.1), IccTier::Poor);
    }

    #[test]
    fn zero_variance_flagged() {
        let m = r(&[[2.0, 2.0], [2.0, 2.0]]);
        assert!(icc_2_1(&m).is_err());
    }

    #[test]
    fn shape_validation() {
        assert!(Ratings::new(vec![vec![1.0, 2.0]]).is_err());
        assert!(Ratings::new(vec![vec![1.0], vec![2.0]]).is_err());
        assert!(Ratings::new(vec![vec![1.0, 2.0], vec![f64::NAN, 1.0]]).is_err());
    }

    proptest! {
        #[test]
        fn constant_shift_invariance_and_rater_bias(
            base in prop::collection::vec(0.0f64..10.0, 6),
            noise in prop::collection::vec(-0.5f64..0.5, 6),
            c in 0.1f64..5.0,
        ) {
            let rows: Vec<Vec<f64>> = base.iter().zip(&noise).map(|(&b, &e)| vec![b, b + e]).collect();
            let Ok(m) = Ratings::new(rows.clone()) else { return Ok(()); };
            let Ok(icc) = icc_2_1(&m) else { return Ok(()); };
            let shifted = Ratings::new(rows.iter().map(|r| vec![r[0] + c, r[1] + c]).collect()).unwrap();
            prop_assert!((icc_2_1(&shifted).unwrap() - icc).abs() < 1e-9);
            if icc > 0.0 {
                let biased = Ratings::new(rows.iter().map(|r| vec![r[0], r[1] + c]).collect()).unwrap();
                let ib = icc_2_1(&biased).unwrap();
                // raising one rater's mean by c > 0 only increases MS_C when it moves
                // the column means apart; compare against the column-mean gap
                let gap = |rs: &[Vec<f64>]| {
                    let n = rs.len() as f64;
                    (rs.iter().map(|r| r[1]).sum::<f64>() - rs.iter().map(|r| r[0]).sum::<f64>()) / n
                };
                let before = gap(&rows).abs();
                let after = (gap(&rows) + c).abs();
                if after > before {
                    prop_assert!(ib < icc);
                }
            }
        }
    }
}
