use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ChainRecord, Kernel, Selection};
use crate::corpus::{write_documents, Corpus, Document, InputFormat, Provenance};
use crate::error::{Error, Result};
use crate::genkernel::{
    conditional_generate, fit_population_model, sample_population, sample_text, AttributeModel,
    GaussianMixture, MixtureFitConfig, NGramModel, SamplerConfig, Vocabulary,
};
use crate::imagemetrics::{write_features, FeatureRecord};
use crate::mitigation::{filter_image_pool, filter_text_pools, FilterConfig};
use crate::rng;

/// Kernel kind and hyperparameters of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelConfig {
    Text {
        #[serde(default = "default_order")]
        order: usize,
        #[serde(default = "default_add_k")]
        add_k: f64,
        #[serde(default)]
        sampler: SamplerConfig,
    },
    ConditionalText {
        #[serde(default = "default_conditional_order")]
        order: usize,
        #[serde(default = "default_add_k")]
        add_k: f64,
        #[serde(default = "conditional_sampler")]
        sampler: SamplerConfig,
        context_sections: Vec<String>,
        target_section: String,
    },
    Population {
        #[serde(default)]
        mixture: MixtureFitConfig,
        #[serde(default = "default_temperature")]
        temperature: f64,
    },
}

fn default_order() -> usize {
    3
}
fn default_conditional_order() -> usize {
    4
}
fn default_add_k() -> f64 {
    0.01
}
fn default_temperature() -> f64 {
    1.0
}
fn conditional_sampler() -> SamplerConfig {
    SamplerConfig::CONDITIONAL
}

impl KernelConfig {
    pub fn text() -> Self {
        KernelConfig::Text { order: 3, add_k: 0.01, sampler: SamplerConfig::UNCONDITIONAL }
    }

    pub fn population(temperature: f64) -> Self {
        KernelConfig::Population { mixture: MixtureFitConfig::default(), temperature }
    }
}

impl ChainRecord for Document {
    fn provenance(&self) -> Provenance {
        self.provenance
    }
    fn id(&self) -> &str {
        &self.id
    }
}

impl ChainRecord for FeatureRecord<f64> {
    fn provenance(&self) -> Provenance {
        self.provenance
    }
    fn id(&self) -> &str {
        &self.id
    }
}

fn text_filter(config: &FilterConfig, synthetic: &[Document], real: &[Document]) -> Result<Selection> {
    match config {
        FilterConfig::Text(c) => {
            let out = filter_text_pools(synthetic, real, c)?;
            Ok(Selection { synthetic: out.synthetic, real: Some(out.real), log: out.log })
        }
        FilterConfig::Image(_) => Err(Error::Config("image filter on a text chain".into())),
    }
}

/// Unconditional n-gram kernel over a fixed vocabulary.
#[derive(Debug, Clone)]
pub struct TextKernel {
    pub order: usize,
    pub add_k: f64,
    pub sampler: SamplerConfig,
    pub vocab: Arc<Vocabulary>,
}

impl Kernel for TextKernel {
    type Record = Document;
    type Model = NGramModel;

    fn fit(&self, train: &[Document], _seed: u64) -> Result<NGramModel> {
        NGramModel::fit(&train.iter().cloned().collect::<Corpus>(), self.order, self.add_k, Some(self.vocab.clone()))
    }

    fn sample(&self, model: &NGramModel, n: usize, generation: u32, seed: u64) -> Result<Vec<Document>> {
        sample_text(model, &self.sampler, n, generation, seed)
    }

    fn filter(&self, config: &FilterConfig, synthetic: &[Document], real: &[Document]) -> Result<Selection> {
        text_filter(config, synthetic, real)
    }

    fn model_snapshot(&self, model: &NGramModel) -> Result<String> {
        model.to_snapshot()
    }

    fn write_records(&self, records: &[Document]) -> Result<String> {
        Ok(write_documents(records, InputFormat::SectionedText))
    }

    fn records_extension(&self) -> &'static str {
        "txt"
    }
}

/// Context → target kernel: the model is fitted on whole documents and, at
/// sampling time, writes the target section for contexts drawn from the real
/// pool. Outputs carry the context document's labels and demographics, and
/// their ids end with the context document's id (see [`source_id`]).
#[derive(Debug, Clone)]
pub struct ConditionalTextKernel {
    pub order: usize,
    pub add_k: f64,
    pub sampler: SamplerConfig,
    pub vocab: Arc<Vocabulary>,
    pub contexts: Arc<Vec<Document>>,
    pub context_sections: Vec<String>,
    pub target_section: String,
}

impl ConditionalTextKernel {
    /// Context sections of `doc` in the configured order.
    pub fn context_of(&self, doc: &Document) -> Vec<(String, String)> {
        self.context_sections
            .iter()
            .filter_map(|s| doc.section(s).map(|t| (s.clone(), t.to_string())))
            .collect()
    }

    /// Training view of a document: context sections then the target.
    fn framed(&self, doc: &Document) -> Result<Document> {
        let mut sections = self.context_of(doc);
        if let Some(t) = doc.section(&self.target_section) {
            sections.push((self.target_section.clone(), t.to_string()));
        }
        Document::new(doc.id.clone(), sections, doc.provenance)
    }
}

impl Kernel for ConditionalTextKernel {
    type Record = Document;
    type Model = NGramModel;

    fn fit(&self, train: &[Document], _seed: u64) -> Result<NGramModel> {
        let framed = train.iter().map(|d| self.framed(d)).collect::<Result<Corpus>>()?;
        NGramModel::fit(&framed, self.order, self.add_k, Some(self.vocab.clone()))
    }

    fn sample(&self, model: &NGramModel, n: usize, generation: u32, seed: u64) -> Result<Vec<Document>> {
        if self.contexts.is_empty() {
            return Err(Error::Empty("no contexts for conditional generation".into()));
        }
        let mut order: Vec<usize> = (0..self.contexts.len()).collect();
        order.shuffle(&mut rng::stream(seed, u64::MAX));
        (0..n)
            .map(|i| {
                let src = &self.contexts[order[i % order.len()]];
                let ctx = self.context_of(src);
                let target = conditional_generate(model, &ctx, &self.target_section, &self.sampler, rng::derive(seed, i as u64))?;
                let mut sections = ctx;
                sections.push((self.target_section.clone(), target));
                let mut doc = Document::new(format!("g{generation}-{i:05}-{}", src.id), sections, Provenance::Synthetic(generation))?
                    .with_labels(src.labels.iter().cloned());
                doc.demographics = src.demographics;
                Ok(doc)
            })
            .collect()
    }

    fn filter(&self, config: &FilterConfig, synthetic: &[Document], real: &[Document]) -> Result<Selection> {
        text_filter(config, synthetic, real)
    }

    fn model_snapshot(&self, model: &NGramModel) -> Result<String> {
        model.to_snapshot()
    }

    fn write_records(&self, records: &[Document]) -> Result<String> {
        Ok(write_documents(records, InputFormat::SectionedText))
    }

    fn records_extension(&self) -> &'static str {
        "txt"
    }
}

/// Id of the real document a conditional output was written for.
pub fn source_id(output_id: &str) -> Option<&str> {
    let mut parts = output_id.splitn(3, '-');
    let g = parts.next()?;
    let i = parts.next()?;
    if !g.starts_with('g') || i.is_empty() || !i.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    parts.next().filter(|s| !s.is_empty())
}

/// Gaussian-mixture + attribute kernel for feature populations.
#[derive(Debug, Clone)]
pub struct PopulationKernel {
    pub mixture: MixtureFitConfig,
    pub temperature: f64,
}

#[derive(Debug, Clone)]
pub struct PopulationModel {
    pub mixture: GaussianMixture<f64>,
    pub attributes: AttributeModel,
}

impl Kernel for PopulationKernel {
    type Record = FeatureRecord<f64>;
    type Model = PopulationModel;

    fn fit(&self, train: &[FeatureRecord<f64>], seed: u64) -> Result<PopulationModel> {
        let (mixture, attributes) = fit_population_model(train, &self.mixture, seed)?;
        Ok(PopulationModel { mixture, attributes })
    }

    fn sample(&self, model: &PopulationModel, n: usize, generation: u32, seed: u64) -> Result<Vec<FeatureRecord<f64>>> {
        sample_population(&model.mixture, &model.attributes, n, self.temperature, generation, seed)
    }

    fn filter(&self, config: &FilterConfig, synthetic: &[FeatureRecord<f64>], real: &[FeatureRecord<f64>]) -> Result<Selection> {
        match config {
            FilterConfig::Image(c) => {
                let out = filter_image_pool(synthetic, real, c)?;
                Ok(Selection {
                    synthetic: out.kept,
                    real: None,
                    log: crate::mitigation::FilterLog { synthetic: out.log, real: Vec::new() },
                })
            }
            FilterConfig::Text(_) => Err(Error::Config("text filter on a population chain".into())),
        }
    }

    fn model_snapshot(&self, model: &PopulationModel) -> Result<String> {
        let mixture: serde_json::Value = serde_json::from_str(&model.mixture.to_snapshot()?)?;
        Ok(serde_json::to_string(&serde_json::json!({
            "mixture": mixture,
            "attributes": model.attributes,
        }))?)
    }

    fn write_records(&self, records: &[FeatureRecord<f64>]) -> Result<String> {
        if records.is_empty() {
            return Ok(String::new());
        }
        write_features(records, &[])
    }

    fn records_extension(&self) -> &'static str {
        "csv"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_ids() {
        assert_eq!(source_id("g3-00012-toy-00044"), Some("toy-00044"));
        assert_eq!(source_id("g0-00000-a"), Some("a"));
        assert_eq!(source_id("g3-00012"), None);
        assert_eq!(source_id("x3-00012-a"), None);
        assert_eq!(source_id("g3-1x-a"), None);
    }
}
