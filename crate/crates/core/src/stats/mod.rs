//! Statistical toolbox: distributional distances, agreement coefficients,
//! correlations, bootstrap intervals and edit-based evaluation metrics.

mod bootstrap;
mod chisq;
mod correlation;
mod edit;
mod icc;
mod kappa;
pub mod special;
mod wasserstein;

pub use bootstrap::{bootstrap_ci, percentile};
pub use chisq::{chi_square_gof, ChiSquare};
pub use correlation::{correlation, midranks, pearson, spearman, CorrelationKind};
pub use edit::{
    edit_metrics, lcs_len, levenshtein, load_edit_records, summarize_edits, EditMetrics,
    EditRecord, EditSummary,
};
pub use icc::{icc_2_1, IccTier, Ratings};
pub use kappa::{cohen_kappa, kappa_from_table};
pub use wasserstein::wasserstein1;

use crate::scalar::Real;

pub fn mean<T: Real>(xs: &[T]) -> T {
    if xs.is_empty() {
        return T::nan();
    }
    xs.iter().copied().sum::<T>() / T::from_usize_lossy(xs.len())
}

/// Sample standard deviation (n − 1 denominator).
pub fn sample_sd<T: Real>(xs: &[T]) -> T {
    if xs.len() < 2 {
        return T::nan();
    }
    let m = mean(xs);
    let ss: T = xs.iter().map(|&x| (x - m) * (x - m)).sum();
    (ss / T::from_usize_lossy(xs.len() - 1)).sqrt()
}
