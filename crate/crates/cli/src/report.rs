//! Report files, the run manifest, comparisons and plot series.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use collapselab::stats::{bootstrap_ci, mean, sample_sd};
use collapselab::textmetrics::{parse_metric_rows, write_metric_rows, MetricRow, REPORT_SCHEMA};

use crate::config::ExperimentConfig;
use crate::experiment::{ChainOutcome, ExperimentOutcome};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CI_ITERATIONS: usize = 1_000;
pub const CI_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Jsonl,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Jsonl => "jsonl",
        }
    }
}

pub fn render_rows(rows: &[MetricRow], format: ReportFormat) -> Result<String> {
    Ok(match format {
        ReportFormat::Csv => write_metric_rows(rows)?,
        ReportFormat::Jsonl => {
            let mut s = String::new();
            for r in rows {
                // non-finite values become null in JSON
                s.push_str(&serde_json::to_string(r)?);
                s.push('\n');
            }
            s
        }
    })
}

pub fn parse_rows(text: &str, format: ReportFormat) -> Result<Vec<MetricRow>> {
    Ok(match format {
        ReportFormat::Csv => parse_metric_rows(text)?,
        ReportFormat::Jsonl => {
            #[derive(Deserialize)]
            struct Row {
                condition: String,
                seed: u64,
                generation: u32,
                values: BTreeMap<String, Option<f64>>,
            }
            text.lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| {
                    let r: Row = serde_json::from_str(l)?;
                    let values = r.values.into_iter().map(|(k, v)| (k, v.unwrap_or(f64::NAN))).collect();
                    Ok(MetricRow { condition: r.condition, seed: r.seed, generation: r.generation, values })
                })
                .collect::<Result<_>>()?
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationArtifacts {
    pub generation: u32,
    pub model: PathBuf,
    pub synthetic: PathBuf,
    pub composition: PathBuf,
    pub metrics: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateEntry {
    pub replicate: usize,
    pub seed: u64,
    pub generations_completed: usize,
    pub error: Option<String>,
    pub run_dir: Option<PathBuf>,
    pub generations: Vec<GenerationArtifacts>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub name: String,
    pub report: PathBuf,
    pub replicates: Vec<ReplicateEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub report_schema: String,
    pub report_format: ReportFormat,
    pub config_hash: String,
    pub master_seed: u64,
    pub workers: usize,
    pub wall_clock_seconds: f64,
    pub complete: bool,
    pub conditions: Vec<ConditionEntry>,
    pub config: ExperimentConfig,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Recomputes the config hash.
    pub fn verify(&self) -> Result<()> {
        let h = self.config.hash();
        if h != self.config_hash {
            bail!("config hash mismatch: manifest {} recomputed {h}", self.config_hash);
        }
        Ok(())
    }

    /// All metric rows of a run directory, in condition order.
    pub fn rows(&self, dir: &Path) -> Result<Vec<MetricRow>> {
        let mut out = Vec::new();
        for c in &self.conditions {
            let path = dir.join(&c.report);
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            out.extend(parse_rows(&text, self.report_format)?);
        }
        Ok(out)
    }
}

fn relative(path: &Path, base: &Path) -> PathBuf {
    path.strip_prefix(base).map(Path::to_path_buf).unwrap_or_else(|_| path.to_path_buf())
}

fn replicate_entry(chain: &ChainOutcome, out: &Path, ext: &str) -> ReplicateEntry {
    let run_dir = chain.run_dir.as_deref().map(|d| relative(d, out));
    let generations = match &run_dir {
        Some(d) => (0..chain.generations_completed as u32)
            .map(|t| {
                let g = d.join(format!("gen-{t}"));
                GenerationArtifacts {
                    generation: t,
                    model: g.join("model.json"),
                    synthetic: g.join(format!("synthetic.{ext}")),
                    composition: g.join("composition.json"),
                    metrics: g.join("metrics.json"),
                }
            })
            .collect(),
        None => Vec::new(),
    };
    ReplicateEntry {
        replicate: chain.replicate,
        seed: chain.seed,
        generations_completed: chain.generations_completed,
        error: chain.error.clone(),
        run_dir,
        generations,
    }
}

/// Writes one report per condition and the manifest under `out`.
pub fn write_outputs(
    config: &ExperimentConfig,
    outcome: &ExperimentOutcome,
    out: &Path,
    format: ReportFormat,
    workers: usize,
) -> Result<RunManifest> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let mut conditions = Vec::new();
    for cond in &config.conditions {
        let chains: Vec<&ChainOutcome> = outcome.chains.iter().filter(|c| c.condition == cond.name).collect();
        let rows: Vec<MetricRow> = chains.iter().flat_map(|c| c.rows.iter().cloned()).collect();
        let dir = out.join(&cond.name);
        fs::create_dir_all(&dir)?;
        let report = dir.join(format!("metrics.{}", format.extension()));
        fs::write(&report, render_rows(&rows, format)?)?;
        let ext = if cond.source.is_text() { "txt" } else { "csv" };
        conditions.push(ConditionEntry {
            name: cond.name.clone(),
            report: relative(&report, out),
            replicates: chains.iter().map(|c| replicate_entry(c, out, ext)).collect(),
        });
    }
    let complete = outcome.chains.iter().all(|c| c.error.is_none());
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        report_schema: REPORT_SCHEMA.into(),
        report_format: format,
        config_hash: config.hash(),
        master_seed: config.seed,
        workers,
        wall_clock_seconds: outcome.wall_clock_seconds,
        complete,
        conditions,
        config: config.clone(),
    };
    fs::write(out.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Rows grouped by (condition, generation) → metric → values over replicates.
type Grouped = BTreeMap<(String, u32), BTreeMap<String, Vec<f64>>>;

fn group(rows: &[MetricRow]) -> Grouped {
    let mut g: Grouped = BTreeMap::new();
    for r in rows {
        let cell = g.entry((r.condition.clone(), r.generation)).or_default();
        for (k, v) in &r.values {
            cell.entry(k.clone()).or_default().push(*v);
        }
    }
    g
}

fn interval(values: &[f64], seed: u64) -> (f64, f64) {
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    match finite.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (finite[0], finite[0]),
        _ => bootstrap_ci(&finite, |s| mean(s), CI_ITERATIONS, CI_LEVEL, seed).unwrap_or((f64::NAN, f64::NAN)),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Panel {
    pub name: String,
    pub metric: String,
    /// Conditions to include; all when absent.
    #[serde(default)]
    pub conditions: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FigureSpec {
    #[serde(rename = "panel")]
    pub panels: Vec<Panel>,
}

impl FigureSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(toml::from_str(&text)?)
    }

    /// One panel per metric found in `rows`.
    pub fn every_metric(rows: &[MetricRow]) -> Self {
        let metrics: BTreeSet<&String> = rows.iter().flat_map(|r| r.values.keys()).collect();
        Self {
            panels: metrics
                .into_iter()
                .map(|m| Panel { name: m.clone(), metric: m.clone(), conditions: None })
                .collect(),
        }
    }
}

fn fmt(v: f64) -> String {
    if v.is_nan() { "nan".into() } else { format!("{v}") }
}

/// Panel series: mean over replicates with a bootstrap interval. A `<metric>_sd`
/// companion column (e.g. bootstrap Fréchet) is averaged into `sd`; otherwise
/// `sd` is the spread over replicates.
pub fn panel_series(rows: &[MetricRow], panel: &Panel) -> Result<String> {
    let available: BTreeSet<&String> = rows.iter().flat_map(|r| r.values.keys()).collect();
    if !available.contains(&panel.metric) {
        let list: Vec<&str> = available.iter().map(|s| s.as_str()).collect();
        bail!("panel {:?}: metric {:?} was not evaluated; available: {}", panel.name, panel.metric, list.join(", "));
    }
    let sd_key = format!("{}_sd", panel.metric);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["generation", "condition", "metric", "value", "ci_low", "ci_high", "sd"])?;
    for ((cond, generation), cell) in group(rows) {
        if panel.conditions.as_ref().is_some_and(|cs| !cs.contains(&cond)) {
            continue;
        }
        let Some(values) = cell.get(&panel.metric) else { continue };
        let value = mean(values);
        let (lo, hi) = interval(values, collapselab::rng::fnv1a(format!("{cond}/{generation}").as_bytes()));
        let sd = match cell.get(&sd_key) {
            Some(s) => mean(s),
            None => sample_sd(values),
        };
        w.write_record([
            generation.to_string(),
            cond.clone(),
            panel.metric.clone(),
            fmt(value),
            fmt(lo),
            fmt(hi),
            fmt(sd),
        ])?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

/// Writes `<panel>.csv` for every panel into `out`.
pub fn emit_plot_data(run_dir: &Path, figures: Option<&FigureSpec>, out: &Path) -> Result<Vec<PathBuf>> {
    let manifest = RunManifest::load(run_dir)?;
    if !manifest.complete {
        bail!("run in {} is incomplete", run_dir.display());
    }
    let rows = manifest.rows(run_dir)?;
    let spec = match figures {
        Some(f) => f.clone(),
        None => FigureSpec::every_metric(&rows),
    };
    let series = spec.panels.iter().map(|p| Ok((p, panel_series(&rows, p)?))).collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for (p, text) in series {
        let path = out.join(format!("{}.csv", p.name));
        fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

/// Condition − baseline differences paired by replicate seed.
pub fn compare_conditions(rows: &[MetricRow], baseline: &str, conditions: &[String]) -> Result<String> {
    let index: BTreeMap<(&str, u64, u32), &MetricRow> =
        rows.iter().map(|r| ((r.condition.as_str(), r.seed, r.generation), r)).collect();
    let known: BTreeSet<&str> = rows.iter().map(|r| r.condition.as_str()).collect();
    for c in conditions.iter().map(String::as_str).chain([baseline]) {
        if !known.contains(c) {
            bail!("no rows for condition {c:?}");
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["condition", "baseline", "generation", "metric", "mean_difference", "ci_low", "ci_high", "higher", "pairs"])?;
    for cond in conditions {
        let mut diffs: BTreeMap<(u32, &str), Vec<f64>> = BTreeMap::new();
        for r in rows.iter().filter(|r| &r.condition == cond) {
            let Some(b) = index.get(&(baseline, r.seed, r.generation)) else { continue };
            for (k, v) in &r.values {
                if let Some(bv) = b.values.get(k) {
                    diffs.entry((r.generation, k.as_str())).or_default().push(v - bv);
                }
            }
        }
        for ((generation, metric), d) in diffs {
            let (lo, hi) = interval(&d, collapselab::rng::fnv1a(format!("{cond}/{baseline}/{generation}/{metric}").as_bytes()));
            w.write_record([
                cond.clone(),
                baseline.to_string(),
                generation.to_string(),
                metric.to_string(),
                fmt(mean(&d)),
                fmt(lo),
                fmt(hi),
                d.iter().filter(|&&x| x > 0.0).count().to_string(),
                d.len().to_string(),
            ])?;
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}
