//! Per-label logistic-regression probe trained by full-batch gradient descent.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::features::{population_dim, FeatureRecord};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelProbe {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Mean cross-entropy before each epoch's update, then after the last.
    pub loss_trace: Vec<f64>,
}

impl LabelProbe {
    pub fn probability(&self, x: &[f64]) -> f64 {
        sigmoid(self.bias + x.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeClassifier {
    pub probes: BTreeMap<String, LabelProbe>,
    /// Labels not trained because only one class was present.
    pub skipped: Vec<String>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Mean binary cross-entropy and its gradient (weights, bias).
pub fn loss_and_gradient(weights: &[f64], bias: f64, x: &[&[f64]], y: &[bool]) -> (f64, Vec<f64>, f64) {
    let n = x.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; weights.len()];
    let mut gb = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let z = bias + xi.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>();
        // log(1 + e^{-z}) for positives, log(1 + e^{z}) for negatives
        let s = if yi { -z } else { z };
        loss += s.max(0.0) + (-s.abs()).exp().ln_1p();
        let err = sigmoid(z) - if yi { 1.0 } else { 0.0 };
        for (g, a) in gw.iter_mut().zip(xi.iter()) {
            *g += err * a;
        }
        gb += err;
    }
    gw.iter_mut().for_each(|g| *g /= n);
    (loss / n, gw, gb / n)
}

/// Trains one probe per label in `labels`.
pub fn train_probe(
    features: &[FeatureRecord<f64>],
    labels: &[String],
    learning_rate: f64,
    epochs: usize,
    seed: u64,
) -> Result<ProbeClassifier> {
    let d = population_dim(features)?;
    if !(learning_rate > 0.0) {
        return Err(Error::Config("learning rate must be positive".into()));
    }
    let x: Vec<&[f64]> = features.iter().map(|f| f.vector.as_slice()).collect();
    let mut probes = BTreeMap::new();
    let mut skipped = Vec::new();
    for (li, label) in labels.iter().enumerate() {
        let y: Vec<bool> = features.iter().map(|f| f.labels.contains(label)).collect();
        let pos = y.iter().filter(|&&v| v).count();
        if pos == 0 || pos == y.len() {
            skipped.push(label.clone());
            continue;
        }
        let mut r = rng::stream(seed, li as u64);
        let mut w: Vec<f64> = (0..d).map(|_| 0.01 * r.sample::<f64, _>(StandardNormal)).collect();
        let mut b = 0.0;
        let mut trace = Vec::with_capacity(epochs + 1);
        for _ in 0..epochs {
            let (loss, gw, gb) = loss_and_gradient(&w, b, &x, &y);
            trace.push(loss);
            for (wi, g) in w.iter_mut().zip(&gw) {
                *wi -= learning_rate * g;
            }
            b -= learning_rate * gb;
        }
        trace.push(loss_and_gradient(&w, b, &x, &y).0);
        probes.insert(label.clone(), LabelProbe { weights: w, bias: b, loss_trace: trace });
    }
    Ok(ProbeClassifier { probes, skipped })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelPrevalence {
    pub mean_probability: f64,
    pub positives: usize,
}

/// Per-label mean probability and count of records scoring strictly above
/// `threshold`.
pub fn probe_prevalence(
    probe: &ProbeClassifier,
    features: &[FeatureRecord<f64>],
    threshold: f64,
) -> BTreeMap<String, LabelPrevalence> {
    probe
        .probes
        .iter()
        .map(|(label, p)| {
            let probs: Vec<f64> = features.iter().map(|f| p.probability(&f.vector)).collect();
            let mean_probability = if probs.is_empty() { 0.0 } else { probs.iter().sum::<f64>() / probs.len() as f64 };
            let positives = probs.iter().filter(|&&q| q > threshold).count();
            (label.clone(), LabelPrevalence { mean_probability, positives })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Provenance;

    fn rec(v: Vec<f64>, label: bool) -> FeatureRecord<f64> {
        let mut r = FeatureRecord::new("r", v, Provenance::Real).unwrap();
        if label {
            r.labels.insert("a".into());
        }
        r
    }

    fn separable() -> Vec<FeatureRecord<f64>> {
        let mut out = Vec::new();
        let mut r = rng::stream(5, 0);
        for _ in 0..60 {
            let x: f64 = r.random_range(-2.0..2.0);
            let y: f64 = r.random_range(-2.0..2.0);
            if (x + y).abs() > 0.3 {
                out.push(rec(vec![x, y], x + y > 0.0));
            }
        }
        out
    }

    #[test]
    fn separable_fixture_fits_perfectly() {
        let data = separable();
        let p = train_probe(&data, &["a".into()], 1.0, 2_000, 1).unwrap();
        let lp = &p.probes["a"];
        let acc = data.iter().filter(|f| (lp.probability(&f.vector) > 0.5) == f.labels.contains("a")).count();
        assert_eq!(acc, data.len());
        let t = &lp.loss_trace;
        // the gap to the plateau closes by at least 99%
        assert!(t.last().unwrap() - 0.0 <= 0.01 * (t[0] - 0.0) + 1e-3, "{} {}", t[0], t.last().unwrap());
        assert!(t.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn gradient_matches_central_differences() {
        let data = separable();
        let x: Vec<&[f64]> = data.iter().map(|f| f.vector.as_slice()).collect();
        let y: Vec<bool> = data.iter().map(|f| f.labels.contains("a")).collect();
        let mut r = rng::stream(9, 0);
        for _ in 0..10 {
            let w = vec![r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)];
            let b = r.random_range(-1.0..1.0);
            let (_, gw, gb) = loss_and_gradient(&w, b, &x, &y);
            let h = 1e-6;
            for j in 0..2 {
                let mut wp = w.clone();
                let mut wm = w.clone();
                wp[j] += h;
                wm[j] -= h;
                let fd = (loss_and_gradient(&wp, b, &x, &y).0 - loss_and_gradient(&wm, b, &x, &y).0) / (2.0 * h);
                assert!((fd - gw[j]).abs() / gw[j].abs().max(1e-8) < 1e-4, "{fd} {}", gw[j]);
            }
            let fd = (loss_and_gradient(&w, b + h, &x, &y).0 - loss_and_gradient(&w, b - h, &x, &y).0) / (2.0 * h);
            assert!((fd - gb).abs() / gb.abs().max(1e-8) < 1e-4);
        }
    }

    #[test]
    fn order_invariant() {
        let data = separable();
        let mut rev = data.clone();
        rev.reverse();
        let a = train_probe(&data, &["a".into()], 0.5, 100, 2).unwrap();
        let b = train_probe(&rev, &["a".into()], 0.5, 100, 2).unwrap();
        for (x, y) in a.probes["a"].weights.iter().zip(&b.probes["a"].weights) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn single_class_skipped() {
        let data = vec![rec(vec![0.0], false), rec(vec![1.0], false)];
        let p = train_probe(&data, &["a".into()], 0.1, 10, 0).unwrap();
        assert_eq!(p.skipped, ["a"]);
        assert!(p.probes.is_empty());
    }

    #[test]
    fn prevalence_counts() {
        let zero = ProbeClassifier {
            probes: [("a".to_string(), LabelProbe { weights: vec![0.0], bias: 0.0, loss_trace: vec![] })].into(),
            skipped: vec![],
        };
        let data: Vec<_> = [-2.0, -0.5, 0.0, 0.7, 3.0].iter().map(|&v| rec(vec![v], false)).collect();
        let p = probe_prevalence(&zero, &data, 0.5);
        assert_eq!(p["a"].positives, 0);
        assert!((p["a"].mean_probability - 0.5).abs() < 1e-15);
        let unit = ProbeClassifier {
            probes: [("a".to_string(), LabelProbe { weights: vec![1.0], bias: 0.0, loss_trace: vec![] })].into(),
            skipped: vec![],
        };
        // sigmoid(v) > 0.5 iff v > 0: {0.7, 3.0}
        assert_eq!(probe_prevalence(&unit, &data, 0.5)["a"].positives, 2);
    }
}
