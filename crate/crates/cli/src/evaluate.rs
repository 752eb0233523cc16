//! Per-generation metric computation for text and feature chains.

use std::collections::{BTreeMap, HashMap};

use anyhow::{Context, Result};

use collapselab::corpus::{Corpus, Document, Lexicon, Sex, CONDITIONS};
use collapselab::genkernel::{model_perplexity, NGramModel};
use collapselab::imagemetrics::{bootstrap_frechet, probe_prevalence, train_probe, FeatureRecord, ProbeClassifier};
use collapselab::recursion::{source_id, PopulationModel};
use collapselab::rng;
use collapselab::safety::{evaluate_safety, FindingDetector, SafetyPatterns, SafetyWeights};
use collapselab::stats::{chi_square_gof, wasserstein1};
use collapselab::textmetrics::{
    coherence_score, content_ratio, cooccurrence_matrix, lexical_profile, mean_readability, medical_term_metrics,
    overlap_scores, CooccurrenceMatrix,
};

use crate::config::MetricSet;

/// Tokens at or below this count in the real training pool form the rare tail.
pub const RARE_MAX_COUNT: usize = 2;
pub const FRECHET_SAMPLE: usize = 1_000;
pub const FRECHET_ITERATIONS: usize = 10;
pub const PROBE_THRESHOLD: f64 = 0.5;

/// Real-data side of text evaluation.
pub struct TextReference {
    pub train: Corpus,
    pub heldout: Corpus,
    pub lexicon: Lexicon,
    pub detector: FindingDetector,
    pub patterns: SafetyPatterns,
    distinct: usize,
    rare: HashMap<String, usize>,
    cooccurrence: CooccurrenceMatrix,
    by_id: HashMap<String, usize>,
}

impl TextReference {
    pub fn new(train: Corpus, heldout: Corpus, target_section: Option<&str>) -> Self {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for d in &train {
            for t in d.tokens() {
                *counts.entry(t.clone()).or_default() += 1;
            }
        }
        let distinct = counts.len();
        counts.retain(|_, c| *c <= RARE_MAX_COUNT);
        let mut detector = FindingDetector::builtin();
        if let Some(s) = target_section {
            detector = detector.with_section(s);
        }
        let cooccurrence = cooccurrence_matrix(&train.documents, &CONDITIONS, &detector);
        let by_id = train.iter().enumerate().map(|(i, d)| (d.id.clone(), i)).collect();
        Self {
            train,
            heldout,
            lexicon: Lexicon::builtin(),
            detector,
            patterns: SafetyPatterns::builtin(),
            distinct,
            rare: counts,
            cooccurrence,
            by_id,
        }
    }

    pub fn distinct_tokens(&self) -> usize {
        self.distinct
    }
}

fn mean_abs_gap(a: &CooccurrenceMatrix, b: &CooccurrenceMatrix) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (ra, rb) in a.probabilities.iter().zip(&b.probabilities) {
        for (x, y) in ra.iter().zip(rb) {
            if let (Some(x), Some(y)) = (x, y) {
                sum += (x - y).abs();
                n += 1;
            }
        }
    }
    if n == 0 { f64::NAN } else { sum / n as f64 }
}

/// Metrics of one text generation. `eval` is the fixed-size slice of the
/// generation's output that every metric reads.
pub fn text_metrics(
    reference: &TextReference,
    model: Option<&NGramModel>,
    eval: &[Document],
    target_section: Option<&str>,
    metrics: &[MetricSet],
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    let mut put = |k: &str, v: f64| {
        out.insert(k.to_string(), v);
    };
    for m in metrics {
        match m {
            MetricSet::Lexical => {
                let lex = lexical_profile(eval, &reference.lexicon.stopwords)?;
                put("tokens", lex.total_tokens as f64);
                put("vocabulary", lex.distinct_tokens as f64);
                put("content_vocabulary", lex.vocabulary_size as f64);
                put("vocabulary_retention", lex.distinct_tokens as f64 / reference.distinct as f64);
                put("ttr", lex.ttr);
                for (i, r) in lex.repetition.iter().enumerate() {
                    put(&format!("repetition_{}", i + 1), *r);
                }
                put("mean_length", lex.mean_length);
                put("sd_length", lex.sd_length);
                put("uniqueness", lex.uniqueness);
                put("top_opening_share", lex.top_opening_share);
            }
            MetricSet::Perplexity => {
                let model = model.context("perplexity needs a fitted model")?;
                let real = model_perplexity(model, &reference.heldout.documents)?;
                let own = model_perplexity(model, eval)?;
                put("ppl_real", real);
                put("ppl_own", own);
                put("confidence_gap", real / own);
            }
            MetricSet::RareTail => {
                let mut seen: HashMap<&str, usize> = HashMap::new();
                for d in eval {
                    for t in d.tokens() {
                        if reference.rare.contains_key(t.as_str()) {
                            *seen.entry(t.as_str()).or_default() += 1;
                        }
                    }
                }
                let base: usize = reference.rare.values().sum();
                put("rare_tail_survival", seen.values().sum::<usize>() as f64 / base as f64);
                put("rare_types_surviving", seen.len() as f64);
            }
            MetricSet::MedicalTerms => {
                let r = medical_term_metrics(eval, &reference.lexicon);
                put("medical_term_density", r.density);
                put("medical_unique_terms", r.unique_terms as f64);
            }
            MetricSet::Coherence => {
                put("coherence", coherence_score(eval).map(|c| c.score).unwrap_or(f64::NAN));
            }
            MetricSet::Readability => {
                put("readability", mean_readability(eval).unwrap_or(f64::NAN));
            }
            MetricSet::Content => {
                let c = content_ratio(eval, &reference.lexicon);
                put("clinical_per_1000", c.clinical_per_1000);
                put("template_per_1000", c.template_per_1000);
                put("clinical_template_ratio", c.ratio);
            }
            MetricSet::Cooccurrence => {
                let m = cooccurrence_matrix(eval, &CONDITIONS, &reference.detector);
                put("cooccurrence_gap", mean_abs_gap(&m, &reference.cooccurrence));
            }
            MetricSet::Safety => {
                let refs = references(reference, eval)?;
                for (name, w) in SafetyWeights::presets() {
                    let r = evaluate_safety(eval, &refs, &reference.detector, &reference.patterns, &w)?;
                    if w == SafetyWeights::EQUAL {
                        put("safety_score", r.score);
                        put("sensitivity", r.components.sensitivity);
                        put("hallucination", r.components.hallucination);
                        put("utility", r.components.utility);
                        put("false_reassurance", r.detection.false_reassurance.unwrap_or(f64::NAN));
                    }
                    put(&format!("safety_score_{}", name.replace('-', "_")), r.score);
                }
            }
            MetricSet::Overlap => {
                let section = target_section.context("overlap needs a target section")?;
                let refs = references(reference, eval)?;
                let cand: Vec<&str> = eval.iter().map(|d| d.section(section).unwrap_or("")).collect();
                let gold: Vec<&str> = refs.iter().map(|d| d.section(section).unwrap_or("")).collect();
                let s = overlap_scores(&cand, &gold)?;
                for (i, b) in s.bleu.iter().enumerate() {
                    put(&format!("bleu_{}", i + 1), *b);
                }
                put("rouge_l", s.rouge_l);
            }
            MetricSet::Frechet | MetricSet::Demographics | MetricSet::Prevalence => {}
        }
    }
    Ok(out)
}

fn references(reference: &TextReference, eval: &[Document]) -> Result<Vec<Document>> {
    eval.iter()
        .map(|d| {
            let src = source_id(&d.id).with_context(|| format!("output {:?} names no source document", d.id))?;
            let i = reference.by_id.get(src).with_context(|| format!("unknown source document {src:?}"))?;
            Ok(reference.train.documents[*i].clone())
        })
        .collect()
}

/// Real-data side of feature evaluation.
pub struct PopulationReference {
    pub real: Vec<FeatureRecord<f64>>,
    ages: Vec<f64>,
    male_fraction: f64,
    probe: ProbeClassifier,
    seed: u64,
}

fn ages(records: &[FeatureRecord<f64>]) -> Vec<f64> {
    records.iter().filter_map(|r| r.demographics.map(|d| d.age as f64)).collect()
}

fn sex_counts(records: &[FeatureRecord<f64>]) -> [f64; 2] {
    let mut c = [0.0; 2];
    for d in records.iter().filter_map(|r| r.demographics) {
        c[if d.sex == Sex::Male { 0 } else { 1 }] += 1.0;
    }
    c
}

impl PopulationReference {
    pub fn new(real: Vec<FeatureRecord<f64>>, seed: u64) -> Result<Self> {
        let labels: Vec<String> = {
            let mut all: Vec<String> = real.iter().flat_map(|r| r.labels.iter().cloned()).collect();
            all.sort();
            all.dedup();
            all
        };
        let probe = train_probe(&real, &labels, 0.5, 200, rng::derive(seed, 1))?;
        let [m, f] = sex_counts(&real);
        Ok(Self { ages: ages(&real), male_fraction: m / (m + f), probe, real, seed })
    }
}

pub fn population_metrics(
    reference: &PopulationReference,
    _model: &PopulationModel,
    output: &[FeatureRecord<f64>],
    metrics: &[MetricSet],
) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for m in metrics {
        match m {
            MetricSet::Frechet => {
                let n = FRECHET_SAMPLE.min(reference.real.len()).min(output.len());
                // one resampling stream per condition, shared by every generation
                let b = bootstrap_frechet(&reference.real, output, n, FRECHET_ITERATIONS, rng::derive(reference.seed, 2))?;
                out.insert("frechet".into(), b.mean);
                out.insert("frechet_sd".into(), b.sd);
            }
            MetricSet::Demographics => {
                let a = ages(output);
                out.insert("age_w1".into(), if a.is_empty() { f64::NAN } else { wasserstein1(&reference.ages, &a) });
                let [m, f] = sex_counts(output);
                out.insert("male_fraction".into(), m / (m + f));
                let chi = chi_square_gof(&[m, f], &[reference.male_fraction, 1.0 - reference.male_fraction])?;
                out.insert("gender_chi2".into(), chi.statistic);
                out.insert("gender_p".into(), chi.p_value);
            }
            MetricSet::Prevalence => {
                for (label, p) in probe_prevalence(&reference.probe, output, PROBE_THRESHOLD) {
                    out.insert(format!("prevalence_{label}"), p.positives as f64 / output.len() as f64);
                }
            }
            _ => {}
        }
    }
    Ok(out)
}
