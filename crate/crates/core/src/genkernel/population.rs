//! Gaussian mixture + demographic attribute model for feature populations.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::corpus::{Demographics, Provenance, Sex, MAX_AGE, MIN_AGE};
use crate::error::{Error, Result};
use crate::imagemetrics::{population_dim, FeatureRecord, COVARIANCE_FLOOR};
use crate::linalg::{squared_distance, Cholesky, Matrix};
use crate::rng;
use crate::scalar::Real;

pub const AGE_BIN_WIDTH: u32 = 5;
pub const AGE_BINS: usize = 17;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture<T> {
    weights: Vec<T>,
    means: Vec<Vec<T>>,
    covariances: Vec<Matrix<T>>,
    /// Mean per-record log-likelihood after each EM iteration.
    pub log_likelihood_trace: Vec<f64>,
}

impl<T: Real> GaussianMixture<T> {
    /// Validates the simplex and positive-definite covariances.
    pub fn new(weights: Vec<T>, means: Vec<Vec<T>>, covariances: Vec<Matrix<T>>) -> Result<Self> {
        let m = weights.len();
        if m == 0 || means.len() != m || covariances.len() != m {
            return Err(Error::Config("mixture needs matching non-empty weights, means, covariances".into()));
        }
        let total: f64 = weights.iter().map(|w| w.as_f64()).sum();
        if weights.iter().any(|w| *w < T::zero()) || (total - 1.0).abs() > 1e-6 {
            return Err(Error::Range(format!("mixture weights sum to {total}")));
        }
        let weights: Vec<T> = weights.iter().map(|&w| w / T::lit(total)).collect();
        let d = means[0].len();
        for (mu, cov) in means.iter().zip(&covariances) {
            if mu.len() != d || cov.dim() != d {
                return Err(Error::Dimension { expected: d, got: mu.len().max(cov.dim()) });
            }
            if cov.symmetric_eigen().values.iter().any(|&l| l <= T::zero()) {
                return Err(Error::Numerical("covariance is not positive definite".into()));
            }
        }
        Ok(Self { weights, means, covariances, log_likelihood_trace: Vec::new() })
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<T>] {
        &self.means
    }

    pub fn covariances(&self) -> &[Matrix<T>] {
        &self.covariances
    }

    pub fn to_snapshot(&self) -> Result<String> {
        let snap = MixtureSnapshot {
            format: "collapselab-gmm".into(),
            version: 1,
            weights: self.weights.iter().map(|w| w.as_f64()).collect(),
            means: self.means.iter().map(|m| m.iter().map(|v| v.as_f64()).collect()).collect(),
            covariances: self
                .covariances
                .iter()
                .map(|c| c.to_rows().into_iter().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect())
                .collect(),
            log_likelihood_trace: self.log_likelihood_trace.clone(),
        };
        Ok(serde_json::to_string(&snap)?)
    }

    pub fn from_snapshot(text: &str) -> Result<Self> {
        let s: MixtureSnapshot = serde_json::from_str(text)?;
        if s.format != "collapselab-gmm" || s.version != 1 {
            return Err(Error::Config(format!("unsupported snapshot {} v{}", s.format, s.version)));
        }
        let conv = |v: &Vec<f64>| v.iter().map(|&x| T::lit(x)).collect::<Vec<T>>();
        let mut g = Self::new(
            conv(&s.weights),
            s.means.iter().map(conv).collect(),
            s.covariances
                .iter()
                .map(|rows| Matrix::from_rows(&rows.iter().map(conv).collect::<Vec<_>>()))
                .collect(),
        )?;
        g.log_likelihood_trace = s.log_likelihood_trace;
        Ok(g)
    }
}

#[derive(Serialize, Deserialize)]
struct MixtureSnapshot {
    format: String,
    version: u32,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Vec<Vec<f64>>>,
    log_likelihood_trace: Vec<f64>,
}

/// Sex probabilities and a 5-year age histogram over 18–100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeModel {
    /// [male, female]
    pub sex: [f64; 2],
    pub age_bins: [f64; AGE_BINS],
    /// Records the model was fitted on; zero means no demographics to sample.
    pub observed: usize,
}

pub fn age_bin(age: u32) -> usize {
    (((age.clamp(MIN_AGE, MAX_AGE) - MIN_AGE) / AGE_BIN_WIDTH) as usize).min(AGE_BINS - 1)
}

impl AttributeModel {
    pub fn fit<'a, I: IntoIterator<Item = &'a Demographics>>(demographics: I) -> Self {
        let mut sex = [0.0; 2];
        let mut age_bins = [0.0; AGE_BINS];
        let mut n = 0usize;
        for d in demographics {
            sex[if d.sex == Sex::Male { 0 } else { 1 }] += 1.0;
            age_bins[age_bin(d.age)] += 1.0;
            n += 1;
        }
        if n > 0 {
            sex.iter_mut().for_each(|p| *p /= n as f64);
            age_bins.iter_mut().for_each(|p| *p /= n as f64);
        }
        Self { sex, age_bins, observed: n }
    }

    fn tempered(&self, temperature: f64) -> Self {
        let temper = |ps: &mut [f64]| {
            ps.iter_mut().for_each(|p| *p = p.powf(1.0 / temperature));
            let z: f64 = ps.iter().sum();
            ps.iter_mut().for_each(|p| *p /= z);
        };
        let mut out = self.clone();
        if self.observed > 0 {
            temper(&mut out.sex);
            temper(&mut out.age_bins);
        }
        out
    }

    pub fn sample<R: Rng>(&self, r: &mut R) -> Option<Demographics> {
        if self.observed == 0 {
            return None;
        }
        let sex = if r.random::<f64>() < self.sex[0] { Sex::Male } else { Sex::Female };
        let bins = WeightedIndex::new(self.age_bins).ok()?;
        let b = bins.sample(r) as u32;
        let lo = MIN_AGE + b * AGE_BIN_WIDTH;
        let hi = if b as usize == AGE_BINS - 1 { MAX_AGE } else { lo + AGE_BIN_WIDTH - 1 };
        Demographics::new(sex, r.random_range(lo..=hi)).ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MixtureFitConfig {
    pub components: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub covariance_floor: f64,
}

impl Default for MixtureFitConfig {
    fn default() -> Self {
        Self { components: 4, tolerance: 1e-6, max_iterations: 200, covariance_floor: COVARIANCE_FLOOR }
    }
}

fn log_densities<T: Real>(x: &[T], means: &[Vec<T>], chols: &[Cholesky<T>], log_w: &[T]) -> Vec<T> {
    let d = T::from_usize_lossy(x.len());
    let log_2pi = T::lit((2.0 * std::f64::consts::PI).ln());
    means
        .iter()
        .zip(chols)
        .zip(log_w)
        .map(|((mu, ch), &lw)| {
            let diff: Vec<T> = x.iter().zip(mu).map(|(&a, &b)| a - b).collect();
            lw - T::lit(0.5) * (d * log_2pi + ch.log_det() + ch.quad_form(&diff))
        })
        .collect()
}

fn log_sum_exp<T: Real>(v: &[T]) -> T {
    let m = v.iter().copied().fold(T::neg_infinity(), T::max);
    m + v.iter().map(|&x| (x - m).exp()).sum::<T>().ln()
}

/// Weighted M-step. `resp[i][k]` is the responsibility of component k for row i.
fn m_step<T: Real>(x: &[&[T]], resp: &[Vec<T>], m: usize, floor: T) -> Result<(Vec<T>, Vec<Vec<T>>, Vec<Matrix<T>>)> {
    let d = x[0].len();
    let n = T::from_usize_lossy(x.len());
    let mut weights = Vec::with_capacity(m);
    let mut means = Vec::with_capacity(m);
    let mut covs = Vec::with_capacity(m);
    for k in 0..m {
        let nk: T = resp.iter().map(|r| r[k]).sum();
        if nk <= T::lit(1e-10) {
            return Err(Error::Numerical(format!("mixture component {k} lost all support")));
        }
        let mut mu = vec![T::zero(); d];
        for (xi, r) in x.iter().zip(resp) {
            for (a, &b) in mu.iter_mut().zip(xi.iter()) {
                *a += r[k] * b;
            }
        }
        mu.iter_mut().for_each(|v| *v /= nk);
        let mut cov = Matrix::zeros(d);
        for (xi, r) in x.iter().zip(resp) {
            let w = r[k];
            for i in 0..d {
                let di = xi[i] - mu[i];
                for j in i..d {
                    cov[(i, j)] += w * di * (xi[j] - mu[j]);
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                let v = cov[(i, j)] / nk;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        cov.add_diagonal(floor);
        weights.push(nk / n);
        means.push(mu);
        covs.push(cov);
    }
    Ok((weights, means, covs))
}

/// Seeded k-means++ seeding followed by Lloyd iterations; returns hard
/// assignments.
fn kmeans_assign<T: Real, R: Rng>(x: &[&[T]], m: usize, r: &mut R) -> Vec<usize> {
    let n = x.len();
    let mut centers: Vec<Vec<T>> = vec![x[r.random_range(0..n)].to_vec()];
    let mut d2: Vec<f64> = x.iter().map(|xi| squared_distance(xi, &centers[0]).as_f64()).collect();
    while centers.len() < m {
        let next = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(r),
            Err(_) => r.random_range(0..n),
        };
        centers.push(x[next].to_vec());
        for (di, xi) in d2.iter_mut().zip(x) {
            *di = di.min(squared_distance(xi, centers.last().unwrap()).as_f64());
        }
    }
    let mut assign = vec![0usize; n];
    for _ in 0..25 {
        let mut changed = false;
        for (i, xi) in x.iter().enumerate() {
            let best = (0..m)
                .min_by(|&a, &b| squared_distance(xi, &centers[a]).partial_cmp(&squared_distance(xi, &centers[b])).unwrap())
                .unwrap();
            if best != assign[i] {
                assign[i] = best;
                changed = true;
            }
        }
        let d = x[0].len();
        let mut sums = vec![vec![T::zero(); d]; m];
        let mut counts = vec![0usize; m];
        for (xi, &a) in x.iter().zip(&assign) {
            counts[a] += 1;
            for (s, &v) in sums[a].iter_mut().zip(xi.iter()) {
                *s += v;
            }
        }
        for k in 0..m {
            if counts[k] == 0 {
                // re-seed an empty cluster at the point farthest from its center
                let far = (0..n)
                    .max_by(|&a, &b| {
                        squared_distance(x[a], &centers[assign[a]])
                            .partial_cmp(&squared_distance(x[b], &centers[assign[b]]))
                            .unwrap()
                    })
                    .unwrap();
                centers[k] = x[far].to_vec();
                assign[far] = k;
                changed = true;
            } else {
                centers[k] = sums[k].iter().map(|&s| s / T::from_usize_lossy(counts[k])).collect();
            }
        }
        if !changed {
            break;
        }
    }
    assign
}

/// EM fit of an `m`-component mixture with k-means++ initialization, plus
/// the empirical attribute model of the records' demographics.
pub fn fit_population_model<T: Real>(
    features: &[FeatureRecord<T>],
    config: &MixtureFitConfig,
    seed: u64,
) -> Result<(GaussianMixture<T>, AttributeModel)> {
    let d = population_dim(features)?;
    let m = config.components;
    if m == 0 {
        return Err(Error::Config("mixture needs at least one component".into()));
    }
    let needed = m * (d + 1);
    if features.len() < needed {
        return Err(Error::Insufficient { what: "mixture fit".into(), needed, available: features.len() });
    }
    let x: Vec<&[T]> = features.iter().map(|f| f.vector.as_slice()).collect();
    let floor = T::lit(config.covariance_floor);
    let mut r = rng::stream(seed, 0);
    let assign = kmeans_assign(&x, m, &mut r);
    let mut resp: Vec<Vec<T>> = assign
        .iter()
        .map(|&a| (0..m).map(|k| if k == a { T::one() } else { T::zero() }).collect())
        .collect();
    let (mut weights, mut means, mut covs) = m_step(&x, &resp, m, floor)?;
    let mut trace: Vec<f64> = Vec::new();
    for _ in 0..config.max_iterations {
        let chols = covs
            .iter()
            .map(|c| c.cholesky())
            .collect::<Result<Vec<_>>>()
            .map_err(|_| Error::Numerical("component covariance lost positive definiteness".into()))?;
        let log_w: Vec<T> = weights.iter().map(|w| w.ln()).collect();
        let mut ll = 0.0;
        for (xi, ri) in x.iter().zip(resp.iter_mut()) {
            let lp = log_densities(xi, &means, &chols, &log_w);
            let lse = log_sum_exp(&lp);
            ll += lse.as_f64();
            for (q, &l) in ri.iter_mut().zip(&lp) {
                *q = (l - lse).exp();
            }
        }
        let mean_ll = ll / x.len() as f64;
        if !mean_ll.is_finite() {
            return Err(Error::Numerical("non-finite log-likelihood".into()));
        }
        if let Some(&prev) = trace.last() {
            if mean_ll < prev - 1e-8 {
                return Err(Error::Numerical(format!("EM log-likelihood decreased from {prev} to {mean_ll}")));
            }
        }
        let converged = trace.last().is_some_and(|&prev| mean_ll - prev < config.tolerance);
        trace.push(mean_ll);
        if converged {
            break;
        }
        (weights, means, covs) = m_step(&x, &resp, m, floor)?;
    }
    let mut gmm = GaussianMixture::new(weights, means, covs)?;
    gmm.log_likelihood_trace = trace;
    let attrs = AttributeModel::fit(features.iter().filter_map(|f| f.demographics.as_ref()));
    Ok((gmm, attrs))
}

/// Draws `n` unlabeled records with provenance `Synthetic(generation)`.
///
/// `temperature` < 1 sharpens every distribution: mixture weights and the
/// attribute probabilities are raised to 1/τ and renormalized, covariances
/// are scaled by τ. At τ = 1 this is plain ancestral sampling.
pub fn sample_population<T: Real>(
    gmm: &GaussianMixture<T>,
    attrs: &AttributeModel,
    n: usize,
    temperature: f64,
    generation: u32,
    seed: u64,
) -> Result<Vec<FeatureRecord<T>>> {
    if !(temperature > 0.0 && temperature.is_finite()) {
        return Err(Error::Config(format!("sampling temperature {temperature} must be positive")));
    }
    let w: Vec<f64> = gmm.weights.iter().map(|w| w.as_f64().powf(1.0 / temperature)).collect();
    let pick = WeightedIndex::new(&w).map_err(|e| Error::Numerical(e.to_string()))?;
    let scale = T::lit(temperature.sqrt());
    let roots: Vec<Matrix<T>> = gmm.covariances.iter().map(|c| c.sqrt_psd().scaled(scale)).collect();
    let attrs = attrs.tempered(temperature);
    (0..n)
        .map(|i| {
            let mut r = rng::stream(seed, i as u64);
            let k = pick.sample(&mut r);
            let z: Vec<T> = (0..gmm.dim()).map(|_| T::lit(r.sample::<f64, _>(StandardNormal))).collect();
            let v: Vec<T> = roots[k].matvec(&z).iter().zip(&gmm.means[k]).map(|(&a, &b)| a + b).collect();
            let mut rec = FeatureRecord::new(format!("g{generation}-{i:05}"), v, Provenance::Synthetic(generation))?;
            rec.demographics = attrs.sample(&mut r);
            Ok(rec)
        })
        .collect()
}
