use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

/// Linear-interpolated percentile of sorted data, `q` in [0, 1].
pub fn percentile<T: Real>(sorted: &[T], q: f64) -> T {
    assert!(!sorted.is_empty());
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = T::lit(pos - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

/// Percentile bootstrap confidence interval for `statistic` over `samples`.
///
/// Each iteration resamples with replacement from its own derived stream, so
/// the interval only depends on (samples, iterations, seed).
pub fn bootstrap_ci<T, F>(
    samples: &[T],
    statistic: F,
    iterations: usize,
    confidence: f64,
    seed: u64,
) -> Result<(T, T)>
where
    T: Real,
    F: Fn(&[T]) -> T,
{
    if samples.len() < 2 {
        return Err(Error::Range("bootstrap needs at least 2 samples".into()));
    }
    if iterations < 100 {
        return Err(Error::Range("bootstrap needs at least 100 iterations".into()));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Range(format!("confidence {confidence} outside (0, 1)")));
    }
    let n = samples.len();
    let mut buf = vec![T::zero(); n];
    let mut stats: Vec<T> = (0..iterations)
        .map(|it| {
            let mut r = rng::stream(seed, it as u64);
            for slot in buf.iter_mut() {
                *slot = samples[r.random_range(0..n)];
            }
            statistic(&buf)
        })
        .collect();
    stats.sort_by(|a, b| a.partial_cmp(b).expect("finite statistic"));
    let alpha = (1.0 - confidence) / 2.0;
    Ok((percentile(&stats, alpha), percentile(&stats, 1.0 - alpha)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::mean;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn constant_samples_degenerate() {
        let (lo, hi) = bootstrap_ci(&[4.0; 10], mean, 200, 0.95, 1).unwrap();
        assert_eq!((lo, hi), (4.0, 4.0));
    }

    #[test]
    fn deterministic() {
        let xs: Vec<f64> = (0..30).map(|i| (i * 7 % 11) as f64).collect();
        let a = bootstrap_ci(&xs, mean, 500, 0.95, 9).unwrap();
        let b = bootstrap_ci(&xs, mean, 500, 0.95, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn normal_theory_width() {
        let mut r = rng::stream(2024, 0);
        let xs: Vec<f64> = (0..100).map(|_| StandardNormal.sample(&mut r)).collect();
        let (lo, hi) = bootstrap_ci(&xs, mean, 10_000, 0.95, 5).unwrap();
        let sd = crate::stats::sample_sd(&xs);
        // normal theory: 2 · 1.96 · s / √n (s ≈ 1 for a standard normal sample)
        let expected = 2.0 * 1.96 * sd / 10.0;
        assert!(((hi - lo) - expected).abs() / expected < 0.2, "{} vs {}", hi - lo, expected);
        let nominal = 2.0 * 1.96 / 10.0;
        assert!(((hi - lo) - nominal).abs() / nominal < 0.2);
    }

    #[test]
    fn preconditions() {
        assert!(bootstrap_ci(&[1.0], mean, 200, 0.95, 0).is_err());
        assert!(bootstrap_ci(&[1.0, 2.0], mean, 50, 0.95, 0).is_err());
    }
}
