//! Image-population measurements at feature-vector scale: Fréchet distance
//! with bootstrap, probe-based label prevalence, AUROC and Mahalanobis
//! quality scores.

mod features;
mod frechet;
mod probe;

pub use features::{
    load_features, parse_features, population_dim, synthesize_feature_population, write_features,
    FeaturePopulationSpec, FeatureRecord,
};
pub use frechet::{bootstrap_frechet, frechet_distance, frechet_from_moments, BootstrapFrechet};
pub use probe::{loss_and_gradient, probe_prevalence, train_probe, LabelPrevalence, LabelProbe, ProbeClassifier};

use crate::error::{Error, Result};
use crate::linalg::covariance;
use crate::scalar::Real;
use crate::stats::midranks;

pub const COVARIANCE_FLOOR: f64 = 1e-6;

/// Probability a random positive outranks a random negative, ties ½.
pub fn auroc<T: Real>(scores: &[T], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Dimension { expected: scores.len(), got: labels.len() });
    }
    let pos = labels.iter().filter(|&&l| l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Undefined("AUROC needs both classes".into()));
    }
    let ranks = midranks(scores);
    let rank_sum: f64 = ranks.iter().zip(labels).filter(|(_, &l)| l).map(|(r, _)| r.as_f64()).sum();
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// Mahalanobis distance of each candidate from the reference population's
/// mean under its covariance (ddof 1) plus a 1e-6 diagonal floor.
pub fn mahalanobis_scores<T: Real, R: AsRef<[T]>>(candidates: &[R], reference: &[R]) -> Result<Vec<T>> {
    let d = reference
        .first()
        .ok_or_else(|| Error::Empty("reference population is empty".into()))?
        .as_ref()
        .len();
    if reference.len() < d + 1 {
        return Err(Error::Insufficient { what: "Mahalanobis reference".into(), needed: d + 1, available: reference.len() });
    }
    let (mu, mut cov) = covariance(reference, 1);
    cov.add_diagonal(T::lit(COVARIANCE_FLOOR));
    let chol = cov
        .cholesky()
        .map_err(|_| Error::Numerical("reference covariance is singular after floor".into()))?;
    candidates
        .iter()
        .map(|c| {
            let c = c.as_ref();
            if c.len() != d {
                return Err(Error::Dimension { expected: d, got: c.len() });
            }
            let diff: Vec<T> = c.iter().zip(&mu).map(|(&a, &b)| a - b).collect();
            Ok(chol.quad_form(&diff).max(T::zero()).sqrt())
        })
        .collect()
}

/// Composite quality embedding: the features, then their coordinate
/// variance, then the mean absolute first difference between coordinates.
pub fn quality_embedding<T: Real>(v: &[T]) -> Vec<T> {
    let n = T::from_usize_lossy(v.len());
    let m = v.iter().copied().sum::<T>() / n;
    let var = v.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / n;
    let edge = if v.len() > 1 {
        v.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<T>() / T::from_usize_lossy(v.len() - 1)
    } else {
        T::zero()
    };
    let mut out = v.to_vec();
    out.push(var);
    out.push(edge);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pair_count(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    den += 1.0;
                    num += if scores[i] > scores[j] { 1.0 } else if scores[i] == scores[j] { 0.5 } else { 0.0 };
                }
            }
        }
        num / den
    }

    #[test]
    fn auroc_cases() {
        assert_eq!(auroc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(auroc(&[0.5; 4], &[false, true, false, true]).unwrap(), 0.5);
        let s = [0.3, 0.7, 0.7, 0.1, 0.9, 0.4];
        let l = [true, false, true, false, true, false];
        assert_relative_eq!(auroc(&s, &l).unwrap(), pair_count(&s, &l), max_relative = 1e-12);
        assert!(auroc(&[0.1, 0.2], &[true, true]).is_err());
    }

    proptest! {
        #[test]
        fn auroc_pairs_and_monotone_invariance(
            data in prop::collection::vec((0u8..6, any::<bool>()), 2..30)
        ) {
            let s: Vec<f64> = data.iter().map(|d| d.0 as f64).collect();
            let l: Vec<bool> = data.iter().map(|d| d.1).collect();
            prop_assume!(l.iter().any(|&x| x) && l.iter().any(|&x| !x));
            let a = auroc(&s, &l).unwrap();
            prop_assert!((a - pair_count(&s, &l)).abs() < 1e-12);
            let t: Vec<f64> = s.iter().map(|x| (x * 0.7).exp() - 3.0).collect();
            prop_assert!((auroc(&t, &l).unwrap() - a).abs() < 1e-12);
        }
    }

    #[test]
    fn mahalanobis_cases() {
        // sample variance of {-1, 0, 1} is exactly 1
        let reference: Vec<Vec<f64>> = vec![vec![-1.0], vec![0.0], vec![1.0]];
        let d = mahalanobis_scores(&[vec![0.0], vec![2.0]], &reference).unwrap();
        assert!(d[0].abs() < 1e-12);
        assert_relative_eq!(d[1], 2.0 / (1.0f64 + 1e-6).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn mahalanobis_by_explicit_inverse() {
        let reference: Vec<Vec<f64>> = vec![vec![0.0, 0.0], vec![2.0, 1.0], vec![1.0, 3.0]];
        // mean (1, 4/3); covariance by hand with ddof 1
        let mu = [1.0, 4.0 / 3.0];
        let mut s = [[0.0f64; 2]; 2];
        for r in &reference {
            for i in 0..2 {
                for j in 0..2 {
                    s[i][j] += (r[i] - mu[i]) * (r[j] - mu[j]) / 2.0;
                }
            }
        }
        s[0][0] += 1e-6;
        s[1][1] += 1e-6;
        let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
        let inv = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
        let c = [3.0, -1.0];
        let dx = [c[0] - mu[0], c[1] - mu[1]];
        let q = dx[0] * (inv[0][0] * dx[0] + inv[0][1] * dx[1]) + dx[1] * (inv[1][0] * dx[0] + inv[1][1] * dx[1]);
        let got = mahalanobis_scores(&[c.to_vec()], &reference).unwrap();
        assert_relative_eq!(got[0], q.sqrt(), max_relative = 1e-9);
        let _ = Matrix::<f64>::identity(2);
    }

    #[test]
    fn mahalanobis_needs_enough_reference() {
        let reference = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(mahalanobis_scores(&[vec![0.0, 0.0]], &reference).is_err());
    }

    #[test]
    fn quality_embedding_channels() {
        let e = quality_embedding(&[1.0, 3.0, 2.0]);
        assert_eq!(e.len(), 5);
        assert_relative_eq!(e[3], 2.0 / 3.0);
        assert_relative_eq!(e[4], 1.5);
    }
}
