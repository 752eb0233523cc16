//! Training-set mitigations: real-data mixing (composition lives in the
//! recursion driver), synthetic volume scaling, and quality-aware filtering.

mod embed;
mod filter;

pub use embed::{bucket, embed_documents, EmbedderSpec, Embeddings};
pub use filter::{
    config_hash, filter_image_pool, filter_text_pools, keep_by_rank, reapply_thresholds, Decision,
    FilterConfig, FilterLog, ImageFilterConfig, ImageFilterOutcome, TextFilterConfig,
    TextFilterOutcome,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 1 − cosine similarity; zero vectors are at distance 1 from everything.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    1.0 - dot / (na.sqrt() * nb.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Cosine,
    Euclidean,
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Cosine => cosine_distance(a, b),
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
        }
    }
}

/// Mean distance from each query to its `k` nearest references (exact
/// search; equal distances are ordered by reference index).
pub fn knn_distance(queries: &[Vec<f64>], references: &[Vec<f64>], k: usize, metric: Metric) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if k > references.len() {
        return Err(Error::Insufficient { what: "k-NN references".into(), needed: k, available: references.len() });
    }
    Ok(queries
        .iter()
        .map(|q| {
            let mut d: Vec<(f64, usize)> = references.iter().enumerate().map(|(i, r)| (metric.distance(q, r), i)).collect();
            let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
            if k < d.len() {
                d.select_nth_unstable_by(k - 1, cmp);
            }
            d[..k].iter().map(|x| x.0).sum::<f64>() / k as f64
        })
        .collect())
}

/// Per-generation training-set sizes: `base` at generation 0, then
/// `base · multiplier[t−1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeSchedule {
    pub base: usize,
    pub multipliers: Vec<f64>,
}

impl VolumeSchedule {
    /// 2×, 3×, 4×, 5× for generations 1–4.
    pub fn linear(base: usize) -> Self {
        Self { base, multipliers: vec![2.0, 3.0, 4.0, 5.0] }
    }

    /// Image protocol: 1.25×, 1.5×, 1.75×, 2× for generations 1–4.
    pub fn image_preset(base: usize) -> Self {
        Self { base, multipliers: vec![1.25, 1.5, 1.75, 2.0] }
    }

    pub fn equal(base: usize, generations: usize) -> Self {
        Self { base, multipliers: vec![1.0; generations] }
    }

    pub fn validate(&self) -> Result<()> {
        if self.base == 0 {
            return Err(Error::Config("volume base must be positive".into()));
        }
        if self.multipliers.iter().any(|&m| !(m >= 1.0 && m.is_finite())) {
            return Err(Error::Config("volume multipliers must be at least 1".into()));
        }
        Ok(())
    }

    /// Sizes for generations 0..=G.
    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![self.base];
        out.extend(self.multipliers.iter().map(|m| (self.base as f64 * m).round() as usize));
        out
    }
}

pub fn volume_for_generation(schedule: &VolumeSchedule, t: usize) -> Result<usize> {
    schedule.validate()?;
    if t == 0 {
        return Err(Error::Range("generation 0 always fits the real base set".into()));
    }
    let m = schedule
        .multipliers
        .get(t - 1)
        .ok_or_else(|| Error::Range(format!("no multiplier for generation {t}")))?;
    Ok((schedule.base as f64 * m).round() as usize)
}
