//! Quality-aware selection of synthetic and real records.

use serde::{Deserialize, Serialize};

use super::embed::{embed_documents, EmbedderSpec};
use super::{knn_distance, Metric};
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::imagemetrics::{mahalanobis_scores, quality_embedding, FeatureRecord};
use crate::rng::fnv1a;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TextFilterConfig {
    pub embedder: EmbedderSpec,
    pub k: usize,
    pub metric: Metric,
    /// Fraction of synthetic records kept, lowest k-NN distance first.
    pub synthetic_keep: f64,
    /// Fraction of real records kept, farthest from the real centroid first.
    pub real_keep: f64,
}

impl Default for TextFilterConfig {
    fn default() -> Self {
        Self {
            embedder: EmbedderSpec::default(),
            k: 10,
            metric: Metric::Cosine,
            synthetic_keep: 0.75,
            real_keep: 0.5,
        }
    }
}

impl TextFilterConfig {
    pub fn validate(&self) -> Result<()> {
        for q in [self.synthetic_keep, self.real_keep] {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::Config(format!("keep quantile {q} outside (0,1]")));
            }
        }
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImageFilterConfig {
    /// Fraction of candidates excluded, lowest composite quality first.
    pub exclude_quantile: f64,
}

impl Default for ImageFilterConfig {
    fn default() -> Self {
        Self { exclude_quantile: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FilterConfig {
    Text(TextFilterConfig),
    Image(ImageFilterConfig),
}

/// Stable hex digest of a configuration's canonical JSON.
pub fn config_hash<C: Serialize>(config: &C) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    format!("{:016x}", fnv1a(json.as_bytes()))
}

/// One logged selection decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub id: String,
    pub score: f64,
    pub kept: bool,
    pub threshold: f64,
    pub config_hash: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FilterLog {
    pub synthetic: Vec<Decision>,
    pub real: Vec<Decision>,
}

impl FilterLog {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["pool", "id", "score", "kept", "threshold", "config_hash"])?;
        for (pool, rows) in [("synthetic", &self.synthetic), ("real", &self.real)] {
            for d in rows {
                w.write_record([
                    pool,
                    &d.id,
                    &format!("{:?}", d.score),
                    if d.kept { "true" } else { "false" },
                    &format!("{:?}", d.threshold),
                    &d.config_hash,
                ])?;
            }
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Serde(e.to_string()))?)
            .map_err(|e| Error::Serde(e.to_string()))
    }
}

/// Keeps the first `count` records ranked by score (ascending, or descending
/// when `highest_first`), ties by index. Returns kept indices in index order
/// and the score of the last kept record.
pub fn keep_by_rank(scores: &[f64], count: usize, highest_first: bool) -> (Vec<usize>, f64) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let c = scores[a].total_cmp(&scores[b]);
        (if highest_first { c.reverse() } else { c }).then(a.cmp(&b))
    });
    let count = count.min(scores.len());
    let threshold = if count == 0 { f64::NAN } else { scores[order[count - 1]] };
    let mut kept = order[..count].to_vec();
    kept.sort_unstable();
    (kept, threshold)
}

fn decisions(ids: &[&str], scores: &[f64], kept: &[usize], threshold: f64, hash: &str) -> Vec<Decision> {
    let mut keep = vec![false; scores.len()];
    kept.iter().for_each(|&i| keep[i] = true);
    ids.iter()
        .zip(scores)
        .zip(keep)
        .map(|((id, &score), kept)| Decision { id: id.to_string(), score, kept, threshold, config_hash: hash.into() })
        .collect()
}

/// Re-applies each decision's threshold to its own score; returns the ids of
/// kept records that would now be dropped. `highest_first` marks pools that
/// keep high scores.
pub fn reapply_thresholds(log: &[Decision], highest_first: bool) -> Vec<String> {
    log.iter()
        .filter(|d| d.kept && if highest_first { d.score < d.threshold } else { d.score > d.threshold })
        .map(|d| d.id.clone())
        .collect()
}

fn keep_count(n: usize, q: f64) -> usize {
    ((q * n as f64) - 1e-9).ceil().max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextFilterOutcome {
    /// Kept indices into the synthetic pool.
    pub synthetic: Vec<usize>,
    /// Kept indices into the real pool.
    pub real: Vec<usize>,
    pub log: FilterLog,
}

/// Synthetic records closest to the real pool (mean cosine distance to the
/// `k` nearest real records) and real records farthest from the real
/// centroid survive.
pub fn filter_text_pools(synthetic: &[Document], real: &[Document], config: &TextFilterConfig) -> Result<TextFilterOutcome> {
    config.validate()?;
    if real.is_empty() {
        return Err(Error::Empty("real pool is empty".into()));
    }
    let hash = config_hash(config);
    let all: Vec<&Document> = real.iter().chain(synthetic).collect();
    let emb = embed_documents(&all, &config.embedder)?;
    let (real_vecs, syn_vecs) = emb.vectors.split_at(real.len());

    let syn_scores = if synthetic.is_empty() {
        Vec::new()
    } else {
        knn_distance(syn_vecs, real_vecs, config.k, config.metric)?
    };
    let (syn_kept, syn_thr) = keep_by_rank(&syn_scores, keep_count(synthetic.len(), config.synthetic_keep), false);

    let dim = real_vecs[0].len();
    let mut centroid = vec![0.0; dim];
    for v in real_vecs {
        centroid.iter_mut().zip(v).for_each(|(c, x)| *c += x);
    }
    centroid.iter_mut().for_each(|c| *c /= real.len() as f64);
    let real_scores: Vec<f64> = real_vecs.iter().map(|v| config.metric.distance(v, &centroid)).collect();
    let (real_kept, real_thr) = keep_by_rank(&real_scores, keep_count(real.len(), config.real_keep), true);

    let syn_ids: Vec<&str> = synthetic.iter().map(|d| d.id.as_str()).collect();
    let real_ids: Vec<&str> = real.iter().map(|d| d.id.as_str()).collect();
    let log = FilterLog {
        synthetic: decisions(&syn_ids, &syn_scores, &syn_kept, syn_thr, &hash),
        real: decisions(&real_ids, &real_scores, &real_kept, real_thr, &hash),
    };
    Ok(TextFilterOutcome { synthetic: syn_kept, real: real_kept, log })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageFilterOutcome {
    pub kept: Vec<usize>,
    pub log: Vec<Decision>,
}

/// Drops the lowest-quality fraction of candidates, quality being the
/// negative Mahalanobis distance from the reference population in the
/// composite embedding (features, coordinate variance, first-difference
/// magnitude). Logged scores are the distances.
pub fn filter_image_pool<T: Real>(
    synthetic: &[FeatureRecord<T>],
    reference: &[FeatureRecord<T>],
    config: &ImageFilterConfig,
) -> Result<ImageFilterOutcome> {
    let q = config.exclude_quantile;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Config(format!("exclusion quantile {q} outside (0,1)")));
    }
    let hash = config_hash(config);
    let cand: Vec<Vec<T>> = synthetic.iter().map(|r| quality_embedding(&r.vector)).collect();
    let refs: Vec<Vec<T>> = reference.iter().map(|r| quality_embedding(&r.vector)).collect();
    let scores: Vec<f64> = mahalanobis_scores(&cand, &refs)?.into_iter().map(T::as_f64).collect();
    let excluded = (q * synthetic.len() as f64 + 1e-9).floor() as usize;
    let (kept, thr) = keep_by_rank(&scores, synthetic.len() - excluded, false);
    let ids: Vec<&str> = synthetic.iter().map(|r| r.id.as_str()).collect();
    Ok(ImageFilterOutcome { log: decisions(&ids, &scores, &kept, thr, &hash), kept })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;

    #[test]
    fn quantile_arithmetic() {
        let (kept, thr) = keep_by_rank(&[0.1, 0.9, 0.2, 0.3], keep_count(4, 0.75), false);
        assert_eq!(kept, [0, 2, 3]);
        assert_eq!(thr, 0.3);
        let (kept, _) = keep_by_rank(&[0.0; 5], keep_count(5, 0.5), true);
        assert_eq!(kept, [0, 1, 2]);
    }

    fn doc(id: usize, t: &str, p: Provenance) -> Document {
        Document::from_text(format!("{id}"), t, p).unwrap()
    }

    #[test]
    fn identical_real_pool_keeps_ceil_half_by_index() {
        let real: Vec<Document> = (0..5).map(|i| doc(i, "same words here", Provenance::Real)).collect();
        let syn: Vec<Document> = (0..4).map(|i| doc(i, "other words", Provenance::Synthetic(0))).collect();
        let cfg = TextFilterConfig { k: 2, ..Default::default() };
        let out = filter_text_pools(&syn, &real, &cfg).unwrap();
        assert_eq!(out.real, [0, 1, 2]);
        assert!(out.log.real.iter().all(|d| d.score.abs() < 1e-12));
        assert_eq!(out.synthetic.len(), 3);
    }

    #[test]
    fn near_synthetic_preferred_and_log_idempotent() {
        let real: Vec<Document> = ["lungs clear no effusion", "heart size normal", "no acute findings", "mild cardiomegaly noted"]
            .iter()
            .enumerate()
            .map(|(i, t)| doc(i, t, Provenance::Real))
            .collect();
        let syn: Vec<Document> = ["lungs clear no effusion", "heart size normal today", "zzz qqq", "no acute findings seen"]
            .iter()
            .enumerate()
            .map(|(i, t)| doc(i, t, Provenance::Synthetic(1)))
            .collect();
        let cfg = TextFilterConfig { k: 1, ..Default::default() };
        let out = filter_text_pools(&syn, &real, &cfg).unwrap();
        assert_eq!(out.synthetic, [0, 1, 3]);
        assert!(reapply_thresholds(&out.log.synthetic, false).is_empty());
        assert!(reapply_thresholds(&out.log.real, true).is_empty());
        let mean_all: f64 = out.log.synthetic.iter().map(|d| d.score).sum::<f64>() / 4.0;
        let mean_kept: f64 = out.log.synthetic.iter().filter(|d| d.kept).map(|d| d.score).sum::<f64>() / 3.0;
        assert!(mean_kept < mean_all);
        let csv = out.log.to_csv().unwrap();
        assert_eq!(csv.lines().count(), 9);
    }

    fn frec(id: usize, v: Vec<f64>) -> FeatureRecord<f64> {
        FeatureRecord::new(format!("{id}"), v, Provenance::Synthetic(1)).unwrap()
    }

    #[test]
    fn image_filter_counts_and_outliers() {
        let mut r = crate::rng::stream(3, 0);
        use rand::Rng;
        let reference: Vec<FeatureRecord<f64>> = (0..200)
            .map(|i| frec(i, vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)]))
            .collect();
        let mut cand: Vec<FeatureRecord<f64>> = (0..6).map(|i| frec(i, vec![0.1 * i as f64 - 0.3, 0.05 * i as f64])).collect();
        cand.insert(2, frec(90, vec![6.0, -6.0]));
        cand.push(frec(91, vec![-5.0, 7.0]));
        let out = filter_image_pool(&cand, &reference, &ImageFilterConfig::default()).unwrap();
        assert_eq!(out.kept.len(), 6);
        assert!(!out.kept.contains(&2) && !out.kept.contains(&7));
        // hand ranking: the two outliers have the largest distances
        let mut by: Vec<(f64, usize)> = out.log.iter().enumerate().map(|(i, d)| (d.score, i)).collect();
        by.sort_by(|a, b| b.0.total_cmp(&a.0));
        assert_eq!({ let mut top = vec![by[0].1, by[1].1]; top.sort(); top }, [2, 7]);
    }

    #[test]
    fn image_filter_ties_by_index() {
        let reference: Vec<FeatureRecord<f64>> = vec![frec(0, vec![-1.0, 0.0]), frec(1, vec![1.0, 0.0]), frec(2, vec![0.0, 1.0]), frec(3, vec![0.0, -1.0]), frec(4, vec![1.0, 1.0]), frec(5, vec![-1.0, -1.0])];
        let (mu, _) = crate::linalg::covariance(&reference.iter().map(|r| r.vector.clone()).collect::<Vec<_>>(), 1);
        let cand: Vec<FeatureRecord<f64>> = (0..8).map(|i| frec(i, mu.clone())).collect();
        let out = filter_image_pool(&cand, &reference, &ImageFilterConfig::default()).unwrap();
        assert_eq!(out.kept, [0, 1, 2, 3, 4, 5]);
    }
}
