//! Feature-vector records, their columnar text format, and a seeded toy
//! population with labeled mixture components.

use std::collections::BTreeSet;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Demographics, Provenance, Sex, MAX_AGE, MIN_AGE};
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::Real;

/// One image surrogate: a feature vector with labels and demographics.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord<T> {
    pub id: String,
    pub vector: Vec<T>,
    pub labels: BTreeSet<String>,
    pub demographics: Option<Demographics>,
    pub provenance: Provenance,
}

impl<T: Real> FeatureRecord<T> {
    pub fn new(id: impl Into<String>, vector: Vec<T>, provenance: Provenance) -> Result<Self> {
        if let Some(i) = vector.iter().position(|v| !v.is_finite()) {
            return Err(Error::Range(format!("non-finite feature at coordinate {i}")));
        }
        Ok(Self {
            id: id.into(),
            vector,
            labels: BTreeSet::new(),
            demographics: None,
            provenance,
        })
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

impl<T> AsRef<[T]> for FeatureRecord<T> {
    fn as_ref(&self) -> &[T] {
        &self.vector
    }
}

/// Checks a population is non-empty with one shared finite dimension.
pub fn population_dim<T: Real>(records: &[FeatureRecord<T>]) -> Result<usize> {
    let first = records
        .first()
        .ok_or_else(|| Error::Empty("feature population is empty".into()))?;
    let d = first.dim();
    if d == 0 {
        return Err(Error::Range("feature dimension must be at least 1".into()));
    }
    for (i, r) in records.iter().enumerate() {
        if r.dim() != d {
            return Err(Error::Dimension { expected: d, got: r.dim() });
        }
        if r.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::MalformedRecord { index: i, reason: "non-finite feature".into() });
        }
    }
    Ok(d)
}

/// Writes records as a comma-separated table:
/// `id,provenance,sex,age,x0..x{d-1},<label>...` with 0/1 label columns.
/// Label columns are the union of labels present, plus `label_names`.
pub fn write_features<T: Real>(records: &[FeatureRecord<T>], label_names: &[String]) -> Result<String> {
    let d = population_dim(records)?;
    let mut labels: BTreeSet<String> = label_names.iter().cloned().collect();
    for r in records {
        labels.extend(r.labels.iter().cloned());
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string(), "provenance".into(), "sex".into(), "age".into()];
    header.extend((0..d).map(|i| format!("x{i}")));
    header.extend(labels.iter().map(|l| format!("label:{l}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.id.clone(), provenance_field(r.provenance)];
        match r.demographics {
            Some(dm) => {
                row.push(dm.sex.as_str().into());
                row.push(dm.age.to_string());
            }
            None => {
                row.push(String::new());
                row.push(String::new());
            }
        }
        row.extend(r.vector.iter().map(|v| format!("{v:?}")));
        row.extend(labels.iter().map(|l| if r.labels.contains(l) { "1".into() } else { "0".into() }));
        w.write_record(&row)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Serde(e.to_string()))?)
        .map_err(|e| Error::Serde(e.to_string()))
}

fn provenance_field(p: Provenance) -> String {
    match p {
        Provenance::Real => "real".into(),
        Provenance::Synthetic(g) => format!("synthetic:{g}"),
    }
}

fn parse_provenance(s: &str) -> Option<Provenance> {
    match s {
        "real" => Some(Provenance::Real),
        _ => s.strip_prefix("synthetic:")?.parse().ok().map(Provenance::Synthetic),
    }
}

pub fn parse_features<T: Real>(text: &str) -> Result<Vec<FeatureRecord<T>>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header.len() < 5 || header[..4] != ["id", "provenance", "sex", "age"] {
        return Err(Error::MalformedRecord {
            index: 0,
            reason: "header must start with id,provenance,sex,age".into(),
        });
    }
    let d = header[4..].iter().take_while(|h| h.starts_with('x')).count();
    let label_cols: Vec<String> = header[4 + d..]
        .iter()
        .map(|h| {
            h.strip_prefix("label:").map(str::to_string).ok_or_else(|| Error::MalformedRecord {
                index: 0,
                reason: format!("unexpected column {h:?}"),
            })
        })
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (i, row) in rd.records().enumerate() {
        let row = row?;
        let bad = |reason: String| Error::MalformedRecord { index: i, reason };
        if row.len() != header.len() {
            return Err(bad(format!("expected {} fields, got {}", header.len(), row.len())));
        }
        let prov = parse_provenance(&row[1]).ok_or_else(|| bad(format!("provenance {:?}", &row[1])))?;
        let vector = (0..d)
            .map(|j| {
                row[4 + j]
                    .parse::<f64>()
                    .map(T::lit)
                    .map_err(|_| bad(format!("feature {:?}", &row[4 + j])))
            })
            .collect::<Result<Vec<T>>>()?;
        let mut rec = FeatureRecord::new(&row[0], vector, prov).map_err(|e| bad(e.to_string()))?;
        if !row[2].is_empty() {
            let sex = Sex::parse(&row[2]).ok_or_else(|| bad(format!("sex {:?}", &row[2])))?;
            let age: u32 = row[3].parse().map_err(|_| bad(format!("age {:?}", &row[3])))?;
            rec.demographics = Some(Demographics::new(sex, age).map_err(|e| bad(e.to_string()))?);
        }
        for (j, l) in label_cols.iter().enumerate() {
            match &row[4 + d + j] {
                "1" => {
                    rec.labels.insert(l.clone());
                }
                "0" => {}
                v => return Err(bad(format!("label {l} value {v:?}"))),
            }
        }
        out.push(rec);
    }
    population_dim(&out)?;
    Ok(out)
}

pub fn load_features<T: Real>(path: impl AsRef<Path>) -> Result<Vec<FeatureRecord<T>>> {
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    parse_features(&text)
}

/// Seeded labeled Gaussian-mixture population standing in for real image
/// features. Component `c` carries `labels[c]` (empty string for none).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeaturePopulationSpec {
    pub dim: usize,
    pub count: usize,
    pub weights: Vec<f64>,
    pub labels: Vec<String>,
    /// Distance of each component mean from the origin.
    pub separation: f64,
    pub male_fraction: f64,
    pub age_mean: f64,
    pub age_sd: f64,
    pub seed: u64,
}

impl Default for FeaturePopulationSpec {
    fn default() -> Self {
        Self {
            dim: 16,
            count: 5_000,
            weights: vec![0.55, 0.22, 0.15, 0.08],
            labels: vec![String::new(), "effusion".into(), "pneumonia".into(), "consolidation".into()],
            separation: 3.0,
            male_fraction: 0.532,
            age_mean: 64.6,
            age_sd: 17.3,
            seed: 7,
        }
    }
}

pub fn synthesize_feature_population(spec: &FeaturePopulationSpec) -> Result<Vec<FeatureRecord<f64>>> {
    if spec.dim == 0 || spec.count == 0 {
        return Err(Error::Config("dimension and count must be positive".into()));
    }
    if spec.weights.is_empty() || spec.weights.len() != spec.labels.len() {
        return Err(Error::Config("one label entry per component weight".into()));
    }
    let pick = WeightedIndex::new(&spec.weights).map_err(|e| Error::Config(e.to_string()))?;
    let age = Normal::new(spec.age_mean, spec.age_sd).map_err(|e| Error::Config(e.to_string()))?;
    let mut r = rng::stream(spec.seed, u64::MAX);
    let mut layout = Vec::new();
    for _ in 0..spec.weights.len() {
        let dir: Vec<f64> = (0..spec.dim).map(|_| r.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mean: Vec<f64> = dir.iter().map(|v| spec.separation * v / norm).collect();
        let scale: Vec<f64> = (0..spec.dim).map(|_| r.random_range(0.5..1.5)).collect();
        layout.push((mean, scale));
    }
    (0..spec.count)
        .map(|i| {
            let mut r = rng::stream(spec.seed, i as u64);
            let c = pick.sample(&mut r);
            let (mean, scale) = &layout[c];
            let v: Vec<f64> = mean
                .iter()
                .zip(scale)
                .map(|(m, s)| m + s * r.sample::<f64, _>(StandardNormal))
                .collect();
            let mut rec = FeatureRecord::new(format!("img-{i:05}"), v, Provenance::Real)?;
            if !spec.labels[c].is_empty() {
                rec.labels.insert(spec.labels[c].clone());
            }
            let sex = if r.random_bool(spec.male_fraction) { Sex::Male } else { Sex::Female };
            let a = age.sample(&mut r).round().clamp(MIN_AGE as f64, MAX_AGE as f64) as u32;
            rec.demographics = Some(Demographics::new(sex, a)?);
            Ok(rec)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn columnar_round_trip() {
        let spec = FeaturePopulationSpec { count: 30, dim: 3, ..Default::default() };
        let pop = synthesize_feature_population(&spec).unwrap();
        let text = write_features(&pop, &["pneumothorax".to_string()]).unwrap();
        assert!(text.starts_with("id,provenance,sex,age,x0,x1,x2,label:consolidation"));
        let back: Vec<FeatureRecord<f64>> = parse_features(&text).unwrap();
        assert_eq!(back, pop);
    }

    #[test]
    fn rejects_bad_rows() {
        let t = "id,provenance,sex,age,x0\na,real,male,50,NaN\n";
        assert!(parse_features::<f64>(t).is_err());
        let t = "id,provenance,sex,age,x0\na,real,male,50,1.0,3\n";
        assert!(parse_features::<f64>(t).is_err());
        let t = "id,provenance,sex,age,x0\na,bogus,male,50,1.0\n";
        assert!(parse_features::<f64>(t).is_err());
    }

    #[test]
    fn population_matches_spec() {
        let pop = synthesize_feature_population(&FeaturePopulationSpec::default()).unwrap();
        assert_eq!(pop.len(), 5_000);
        let cons = pop.iter().filter(|r| r.labels.contains("consolidation")).count() as f64;
        assert!((cons / 5_000.0 - 0.08).abs() < 0.015);
        let male = pop
            .iter()
            .filter(|r| r.demographics.unwrap().sex == Sex::Male)
            .count() as f64;
        assert!((male / 5_000.0 - 0.532).abs() < 0.025);
    }
}
