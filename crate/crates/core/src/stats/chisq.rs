use crate::error::{Error, Result};
use crate::scalar::Real;

use super::special::chi_square_sf;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

impl ChiSquare {
    pub fn significant(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Pearson goodness-of-fit of observed counts against baseline proportions.
///
/// Expected counts are `total · proportion`; proportions are renormalized to
/// sum to one first.
pub fn chi_square_gof<T: Real>(observed: &[T], baseline: &[T]) -> Result<ChiSquare> {
    if observed.len() != baseline.len() {
        return Err(Error::Dimension {
            expected: baseline.len(),
            got: observed.len(),
        });
    }
    if observed.len() < 2 {
        return Err(Error::Range("chi-square needs at least two cells".into()));
    }
    let total: f64 = observed.iter().map(|o| o.as_f64()).sum();
    let psum: f64 = baseline.iter().map(|p| p.as_f64()).sum();
    if !(psum > 0.0) {
        return Err(Error::Range("baseline proportions sum to zero".into()));
    }
    let mut stat = 0.0;
    for (i, (o, p)) in observed.iter().zip(baseline).enumerate() {
        let e = total * p.as_f64() / psum;
        if !(e > 0.0) {
            return Err(Error::Range(format!("expected count in cell {i} is zero")));
        }
        let diff = o.as_f64() - e;
        stat += diff * diff / e;
    }
    let df = observed.len() - 1;
    Ok(ChiSquare {
        statistic: stat,
        df,
        p_value: chi_square_sf(stat, df as f64),
    })
}
