use crate::scalar::Real;

/// 1-D Wasserstein-1 (earth mover's) distance between two empirical
/// distributions: the integral of |F_A⁻¹(u) − F_B⁻¹(u)| over u ∈ [0, 1].
///
/// Sample sizes may differ. Returns NaN if either side is empty.
pub fn wasserstein1<T: Real>(a: &[T], b: &[T]) -> T {
    if a.is_empty() || b.is_empty() {
        return T::nan();
    }
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.partial_cmp(q).expect("finite samples"));
    ys.sort_by(|p, q| p.partial_cmp(q).expect("finite samples"));
    let (n, m) = (xs.len(), ys.len());
    // Walk the merged quantile breakpoints i/n and j/m with exact integer
    // arithmetic on the common denominator n·m.
    let total = n * m;
    let (mut i, mut j) = (0usize, 0usize);
    let mut u = 0usize;
    let mut acc = T::zero();
    while u < total {
        let next_a = (i + 1) * m;
        let next_b = (j + 1) * n;
        let next = next_a.min(next_b);
        acc += (xs[i] - ys[j]).abs() * T::from_usize_lossy(next - u);
        u = next;
        if next_a == next {
            i += 1;
        }
        if next_b == next {
            j += 1;
        }
    }
    acc / T::from_usize_lossy(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn spec_cases() {
        assert_eq!(wasserstein1(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0]), 0.0);
        assert_eq!(wasserstein1(&[0.0], &[3.0]), 3.0);
        assert_eq!(wasserstein1(&[0.0, 1.0], &[1.0, 2.0]), 1.0);
    }

    #[test]
    fn unequal_sizes_match_quantile_integral() {
        // A = {0, 1}, B = {0, 0, 3}: F_A⁻¹ = 0 on [0,.5), 1 on [.5,1];
        // F_B⁻¹ = 0 on [0,2/3), 3 on [2/3,1]. Integral = 1/6·1 + 1/3·2 = 5/6.
        let w: f64 = wasserstein1(&[0.0, 1.0], &[0.0, 0.0, 3.0]);
        assert!((w - 5.0 / 6.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn symmetric_and_triangle(
            a in prop::collection::vec(-50.0f64..50.0, 1..20),
            b in prop::collection::vec(-50.0f64..50.0, 1..20),
            c in prop::collection::vec(-50.0f64..50.0, 1..20),
        ) {
            let ab = wasserstein1(&a, &b);
            let ba = wasserstein1(&b, &a);
            prop_assert!((ab - ba).abs() < 1e-9);
            prop_assert!(ab >= 0.0);
            let ac = wasserstein1(&a, &c);
            let cb = wasserstein1(&c, &b);
            prop_assert!(ab <= ac + cb + 1e-9);
        }
    }
}
