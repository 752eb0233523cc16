use rand::Rng;

use super::features::FeatureRecord;
use crate::error::{Error, Result};
use crate::linalg::{covariance, squared_distance, Matrix};
use crate::rng;
use crate::scalar::Real;
use crate::stats::{mean, sample_sd};

/// Fréchet distance between Gaussian summaries (μ, Σ) of two populations:
/// ‖μa − μb‖² + tr Σa + tr Σb − 2 tr (Σa^½ Σb Σa^½)^½.
pub fn frechet_from_moments<T: Real>(mu_a: &[T], cov_a: &Matrix<T>, mu_b: &[T], cov_b: &Matrix<T>) -> Result<T> {
    let d = mu_a.len();
    if mu_b.len() != d || cov_a.dim() != d || cov_b.dim() != d {
        return Err(Error::Dimension { expected: d, got: mu_b.len() });
    }
    let ra = cov_a.symmetrized().sqrt_psd();
    let inner = ra.matmul(&cov_b.symmetrized()).matmul(&ra).symmetrized();
    let cross: T = inner
        .symmetric_eigen()
        .values
        .into_iter()
        .map(|l| l.max(T::zero()).sqrt())
        .sum();
    let fd = squared_distance(mu_a, mu_b) + cov_a.trace() + cov_b.trace() - T::lit(2.0) * cross;
    Ok(fd.max(T::zero()))
}

fn moments<T: Real, R: AsRef<[T]>>(rows: &[R]) -> Result<(Vec<T>, Matrix<T>)> {
    if rows.len() < 2 {
        return Err(Error::Insufficient { what: "Fréchet moments".into(), needed: 2, available: rows.len() });
    }
    Ok(covariance(rows, 1))
}

/// Fréchet distance between two samples (rows are feature vectors).
pub fn frechet_distance<T: Real, R: AsRef<[T]>>(a: &[R], b: &[R]) -> Result<T> {
    let (da, db) = (a.first().map(|r| r.as_ref().len()), b.first().map(|r| r.as_ref().len()));
    if let (Some(x), Some(y)) = (da, db) {
        if x != y {
            return Err(Error::Dimension { expected: x, got: y });
        }
    }
    let (ma, ca) = moments(a)?;
    let (mb, cb) = moments(b)?;
    frechet_from_moments(&ma, &ca, &mb, &cb)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapFrechet {
    pub mean: f64,
    pub sd: f64,
    pub iterations: usize,
}

/// Each iteration resamples both sides with replacement to `n` records and
/// computes the Fréchet distance; iteration `i` uses stream `(seed, i)`.
pub fn bootstrap_frechet<T: Real>(
    real: &[FeatureRecord<T>],
    synthetic: &[FeatureRecord<T>],
    n: usize,
    iterations: usize,
    seed: u64,
) -> Result<BootstrapFrechet> {
    if iterations < 2 {
        return Err(Error::Undefined("bootstrap sd needs at least 2 iterations".into()));
    }
    for (what, pool) in [("real pool", real.len()), ("synthetic pool", synthetic.len())] {
        if pool < n {
            return Err(Error::Insufficient { what: what.into(), needed: n, available: pool });
        }
    }
    let values = (0..iterations)
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let a: Vec<&[T]> = (0..n).map(|_| real[r.random_range(0..real.len())].vector.as_slice()).collect();
            let b: Vec<&[T]> = (0..n)
                .map(|_| synthetic[r.random_range(0..synthetic.len())].vector.as_slice())
                .collect();
            frechet_distance::<T, _>(&a, &b).map(T::as_f64)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(BootstrapFrechet { mean: mean(&values), sd: sample_sd(&values), iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn identical_samples_zero() {
        let a = vec![vec![1.0, 2.0], vec![0.5, -1.0], vec![3.0, 0.0], vec![-2.0, 1.5]];
        let fd: f64 = frechet_distance(&a, &a).unwrap();
        assert!(fd.abs() < 1e-9);
    }

    #[test]
    fn one_dimensional_closed_form() {
        let mu = |m: f64| vec![m];
        let cov = |v: f64| Matrix::from_rows(&[vec![v]]);
        let fd = frechet_from_moments(&mu(0.0), &cov(1.0), &mu(1.0), &cov(1.0)).unwrap();
        assert_relative_eq!(fd, 1.0, max_relative = 1e-12);
        // (μa−μb)² + (σa−σb)²
        let fd = frechet_from_moments(&mu(0.5), &cov(4.0), &mu(-1.0), &cov(0.25)).unwrap();
        assert_relative_eq!(fd, 1.5f64.powi(2) + 1.5f64.powi(2), max_relative = 1e-12);
    }

    #[test]
    fn diagonal_closed_form() {
        let (va, vb) = ([2.0, 0.5], [1.0, 3.0]);
        let fd = frechet_from_moments(&[1.0, 0.0], &Matrix::diagonal(&va), &[0.0, 2.0], &Matrix::diagonal(&vb)).unwrap();
        let expect: f64 = 1.0 + 4.0 + va.iter().zip(&vb).map(|(a, b): (&f64, &f64)| (a.sqrt() - b.sqrt()).powi(2)).sum::<f64>();
        assert_relative_eq!(fd, expect, max_relative = 1e-10);
    }

    #[test]
    fn matches_nalgebra_sqrtm_of_product() {
        // oracle: tr sqrt(ΣaΣb) from the eigenvalues of the (non-symmetric) product
        let ca: Matrix<f64> = Matrix::from_rows(&[vec![2.0, 0.3, 0.1], vec![0.3, 1.0, -0.2], vec![0.1, -0.2, 0.7]]);
        let cb: Matrix<f64> = Matrix::from_rows(&[vec![1.0, -0.4, 0.0], vec![-0.4, 1.5, 0.3], vec![0.0, 0.3, 0.9]]);
        let na = nalgebra::DMatrix::from_fn(3, 3, |i, j| ca[(i, j)]);
        let nb = nalgebra::DMatrix::from_fn(3, 3, |i, j| cb[(i, j)]);
        let ev = (na.clone() * nb.clone()).complex_eigenvalues();
        let cross: f64 = ev.iter().map(|z| z.re.max(0.0).sqrt()).sum();
        let expect = 0.25 + na.trace() + nb.trace() - 2.0 * cross;
        let fd = frechet_from_moments(&[0.5, 0.0, 0.0], &ca, &[0.0, 0.0, 0.0], &cb).unwrap();
        assert_relative_eq!(fd, expect, max_relative = 1e-9);
    }

    #[test]
    fn dimension_mismatch() {
        let a = vec![vec![1.0, 2.0], vec![0.0, 1.0], vec![2.0, 2.0]];
        let b = vec![vec![1.0], vec![0.0], vec![3.0]];
        assert!(frechet_distance::<f64, _>(&a, &b).is_err());
    }

    fn pop(n: usize, shift: f64, seed: u64) -> Vec<FeatureRecord<f64>> {
        let mut r = rng::stream(seed, 0);
        let g = Normal::new(0.0, 1.0).unwrap();
        (0..n)
            .map(|i| FeatureRecord::new(i.to_string(), vec![g.sample(&mut r) + shift, g.sample(&mut r)], Provenance::Real).unwrap())
            .collect()
    }

    #[test]
    fn bootstrap_is_seeded_and_small_on_self() {
        let p = pop(400, 0.0, 1);
        let a = bootstrap_frechet(&p, &p, 200, 10, 3).unwrap();
        assert_eq!(a, bootstrap_frechet(&p, &p, 200, 10, 3).unwrap());
        assert!(a.mean > 0.0 && a.mean < 0.1, "{a:?}");
        let far = bootstrap_frechet(&p, &pop(400, 2.0, 2), 200, 10, 3).unwrap();
        assert!(far.mean > 3.0);
        assert!(bootstrap_frechet(&p, &p, 200, 1, 3).is_err());
        assert!(bootstrap_frechet(&p, &p, 500, 10, 3).is_err());
    }

    proptest! {
        #[test]
        fn symmetric_and_quadratic_in_shift(
            rows in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 6..12),
            other in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 3), 6..12),
            shift in 0.0f64..4.0,
        ) {
            let ab: f64 = frechet_distance(&rows, &other).unwrap();
            let ba: f64 = frechet_distance(&other, &rows).unwrap();
            prop_assert!((ab - ba).abs() < 1e-6 * (1.0 + ab));
            let moved: Vec<Vec<f64>> = rows.iter().map(|r| vec![r[0] + shift, r[1], r[2]]).collect();
            let fd: f64 = frechet_distance(&rows, &moved).unwrap();
            prop_assert!((fd - shift * shift).abs() < 1e-6 * (1.0 + fd));
        }
    }
}
