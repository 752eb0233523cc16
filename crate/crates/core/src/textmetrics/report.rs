use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column-set version written in every report row.
pub const REPORT_SCHEMA: &str = "collapselab-metrics/1";

/// One row of a metric report: one generation of one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub condition: String,
    pub seed: u64,
    pub generation: u32,
    pub values: BTreeMap<String, f64>,
}

impl MetricRow {
    pub fn new(condition: impl Into<String>, seed: u64, generation: u32) -> Self {
        Self { condition: condition.into(), seed, generation, values: BTreeMap::new() }
    }

    pub fn set(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.values.insert(key.into(), value);
        self
    }
}

fn format_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

/// CSV with columns `schema,condition,seed,generation` then the sorted union
/// of value keys; missing values are blank.
pub fn write_metric_rows(rows: &[MetricRow]) -> Result<String> {
    let keys: BTreeSet<&str> = rows.iter().flat_map(|r| r.values.keys().map(String::as_str)).collect();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["schema", "condition", "seed", "generation"];
    header.extend(keys.iter().copied());
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![REPORT_SCHEMA.to_string(), r.condition.clone(), r.seed.to_string(), r.generation.to_string()];
        rec.extend(keys.iter().map(|k| r.values.get(*k).map(|v| format_value(*v)).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Serde(e.to_string()))?).map_err(|e| Error::Serde(e.to_string()))
}

/// Inverse of [`write_metric_rows`].
pub fn parse_metric_rows(text: &str) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers()?.clone();
    if header.len() < 4 || &header[0] != "schema" {
        return Err(Error::MalformedRecord { index: 0, reason: "missing metric report header".into() });
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let bad = |reason: String| Error::MalformedRecord { index: i + 1, reason };
        if &rec[0] != REPORT_SCHEMA {
            return Err(bad(format!("unknown schema {:?}", &rec[0])));
        }
        let mut row = MetricRow::new(
            &rec[1],
            rec[2].parse().map_err(|_| bad("bad seed".into()))?,
            rec[3].parse().map_err(|_| bad("bad generation".into()))?,
        );
        for (k, v) in header.iter().zip(rec.iter()).skip(4) {
            if !v.is_empty() {
                row.set(k, v.parse::<f64>().map_err(|_| bad(format!("bad value {v:?} for {k}")))?);
            }
        }
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_with_gaps() {
        let mut a = MetricRow::new("control", 1, 0);
        a.set("ttr", 0.25).set("ratio", f64::INFINITY);
        let mut b = MetricRow::new("mixed_25", 1, 4);
        b.set("ttr", 0.125);
        let text = write_metric_rows(&[a.clone(), b.clone()]).unwrap();
        assert!(text.starts_with("schema,condition,seed,generation,ratio,ttr\n"));
        assert_eq!(parse_metric_rows(&text).unwrap(), vec![a, b]);
        assert!(parse_metric_rows("x,y\n1,2\n").is_err());
    }
}
