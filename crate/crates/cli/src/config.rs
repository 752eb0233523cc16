use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use collapselab::corpus::ToyPopulationSpec;
use collapselab::imagemetrics::FeaturePopulationSpec;
use collapselab::mitigation::FilterConfig;
use collapselab::recursion::KernelConfig;

pub const CONFIG_VERSION: u32 = 1;

/// Top-level experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub seed: u64,
    #[serde(default = "one")]
    pub replicates: usize,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Write per-generation models and synthetic corpora.
    #[serde(default = "yes")]
    pub artifacts: bool,
    #[serde(rename = "condition")]
    pub conditions: Vec<Condition>,
}

fn one() -> usize {
    1
}
fn yes() -> bool {
    true
}
fn no_real() -> Vec<f64> {
    vec![0.0]
}
fn default_split() -> [f64; 3] {
    [0.8, 0.1, 0.1]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub name: String,
    pub source: Source,
    pub generations: usize,
    /// Training-set size per generation; defaults to the real training pool size.
    #[serde(default)]
    pub sizes: Option<Vec<usize>>,
    /// Per-generation multipliers (generations 1..G) applied to the real pool size.
    #[serde(default)]
    pub volume: Option<Vec<f64>>,
    #[serde(default = "no_real")]
    pub real_fraction: Vec<f64>,
    #[serde(default)]
    pub filter: Option<FilterConfig>,
    pub kernel: KernelConfig,
    pub metrics: Vec<MetricSet>,
    /// Records per generation that text metrics read; defaults to the size of generation 0.
    #[serde(default)]
    pub eval_size: Option<usize>,
}

/// Where a condition's real pool comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Source {
    /// Synthetic Zipf corpus; its seed is replaced by the replicate seed.
    ToyCorpus {
        #[serde(default)]
        spec: ToyPopulationSpec,
        #[serde(default = "default_split")]
        split: [f64; 3],
    },
    CorpusFile {
        path: PathBuf,
        #[serde(default = "sectioned")]
        format: String,
        #[serde(default = "default_split")]
        split: [f64; 3],
    },
    /// Synthetic feature population; its seed is replaced by the replicate seed.
    FeaturePopulation {
        #[serde(default)]
        spec: FeaturePopulationSpec,
    },
    FeatureFile {
        path: PathBuf,
    },
}

fn sectioned() -> String {
    "sectioned-text".into()
}

impl Source {
    pub fn is_text(&self) -> bool {
        matches!(self, Source::ToyCorpus { .. } | Source::CorpusFile { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MetricSet {
    Lexical,
    Perplexity,
    RareTail,
    MedicalTerms,
    Coherence,
    Readability,
    Content,
    Cooccurrence,
    Safety,
    Overlap,
    Frechet,
    Demographics,
    Prevalence,
}

impl MetricSet {
    pub fn is_text(self) -> bool {
        !matches!(self, MetricSet::Frechet | MetricSet::Demographics | MetricSet::Prevalence)
    }

    /// Needs a context → target kernel.
    pub fn is_conditional(self) -> bool {
        matches!(self, MetricSet::Safety | MetricSet::Overlap)
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing experiment config")?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::parse(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative source paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        for c in &mut self.conditions {
            match &mut c.source {
                Source::CorpusFile { path, .. } | Source::FeatureFile { path } if path.is_relative() => {
                    *path = base.join(&*path);
                }
                _ => {}
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            bail!("unsupported config version {} (expected {CONFIG_VERSION})", self.version);
        }
        if self.replicates == 0 {
            bail!("replicates must be at least 1");
        }
        if self.conditions.is_empty() {
            bail!("no conditions");
        }
        let mut names = BTreeSet::new();
        for c in &self.conditions {
            if !names.insert(c.name.as_str()) {
                bail!("duplicate condition name {:?}", c.name);
            }
            if c.name.is_empty() || !c.name.chars().all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-') {
                bail!("condition name {:?} must be non-empty ASCII letters, digits, '_' or '-'", c.name);
            }
            c.validate().with_context(|| format!("condition {:?}", c.name))?;
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:x}", Sha256::digest(json.as_bytes()))
    }
}

impl Condition {
    fn validate(&self) -> Result<()> {
        if self.generations == 0 {
            bail!("generations must be at least 1");
        }
        if self.sizes.is_some() && self.volume.is_some() {
            bail!("give either sizes or volume, not both");
        }
        if let Some(v) = &self.volume {
            if v.len() != self.generations {
                bail!("volume needs one multiplier per generation 1..{}", self.generations);
            }
        }
        let text_kernel = !matches!(self.kernel, KernelConfig::Population { .. });
        if text_kernel != self.source.is_text() {
            bail!("kernel kind does not match the source kind");
        }
        let conditional = matches!(self.kernel, KernelConfig::ConditionalText { .. });
        for m in &self.metrics {
            if m.is_text() != text_kernel {
                bail!("metric {m:?} does not apply to this source");
            }
            if m.is_conditional() && !conditional {
                bail!("metric {m:?} needs a conditional-text kernel");
            }
        }
        match &self.filter {
            Some(FilterConfig::Text(_)) if !text_kernel => bail!("text filter on a feature source"),
            Some(FilterConfig::Image(_)) if text_kernel => bail!("image filter on a text source"),
            _ => {}
        }
        match &self.source {
            Source::CorpusFile { path, format, .. } => {
                if collapselab::corpus::InputFormat::parse(format).is_none() {
                    bail!("unknown corpus format {format:?}");
                }
                if !path.is_file() {
                    bail!("corpus file {} does not exist", path.display());
                }
            }
            Source::FeatureFile { path } if !path.is_file() => {
                bail!("feature file {} does not exist", path.display());
            }
            _ => {}
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
seed = 3

[[condition]]
name = "control"
generations = 1
metrics = ["lexical", "perplexity"]
source = { kind = "toy-corpus", spec = { document_count = 200 } }
kernel = { kind = "text" }
"#;

    #[test]
    fn minimal_parses() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.replicates, 1);
        assert_eq!(cfg.conditions[0].real_fraction, vec![0.0]);
        assert_eq!(cfg.hash(), ExperimentConfig::parse(MINIMAL).unwrap().hash());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::parse(&MINIMAL.replace("seed = 3", "seed = 3\nseeed = 4")).is_err());
        assert!(ExperimentConfig::parse(&MINIMAL.replace("document_count", "doc_count")).is_err());
    }

    #[test]
    fn validation_errors() {
        let mut cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        cfg.conditions.push(cfg.conditions[0].clone());
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        cfg.conditions[0].metrics.push(MetricSet::Frechet);
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        cfg.conditions[0].metrics = vec![MetricSet::Safety];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        cfg.conditions[0].source = Source::FeatureFile { path: "/nonexistent.csv".into() };
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        cfg.version = 2;
        assert!(cfg.validate().is_err());
    }
}
