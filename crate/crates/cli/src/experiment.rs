//! Runs the conditions of an experiment and collects metric rows.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use collapselab::corpus::{ingest_documents, split_corpus, synthesize_toy_corpus, Corpus, Document, InputFormat};
use collapselab::genkernel::{NGramModel, Vocabulary};
use collapselab::imagemetrics::{load_features, synthesize_feature_population, FeatureRecord};
use collapselab::recursion::{
    run_chain, write_run_directory, ChainConfig, ChainRun, ConditionalTextKernel, Kernel, KernelConfig,
    PopulationKernel, TextKernel,
};
use collapselab::rng;
use collapselab::textmetrics::MetricRow;

use crate::config::{Condition, ExperimentConfig, Source};
use crate::evaluate::{population_metrics, text_metrics, PopulationReference, TextReference};

pub const DETERMINISTIC_ENV: &str = "COLLAPSELAB_DETERMINISTIC";

/// Seed of replicate `r`.
pub fn replicate_seed(master: u64, r: usize) -> u64 {
    rng::derive(master, r as u64)
}

/// One (condition, replicate) chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainOutcome {
    pub condition: String,
    pub replicate: usize,
    pub seed: u64,
    pub generations_completed: usize,
    pub rows: Vec<MetricRow>,
    pub error: Option<String>,
    pub run_dir: Option<PathBuf>,
}

fn chain_config(cond: &Condition, pool: usize, seed: u64) -> ChainConfig {
    let sizes = match (&cond.sizes, &cond.volume) {
        (Some(s), _) => s.clone(),
        (None, Some(v)) => {
            let mut s = vec![pool];
            s.extend(v.iter().map(|m| (pool as f64 * m).round() as usize));
            s
        }
        (None, None) => vec![pool],
    };
    ChainConfig {
        generations: cond.generations,
        sizes,
        real_fraction: cond.real_fraction.clone(),
        filter: cond.filter.clone(),
        kernel: cond.kernel.clone(),
        seed,
    }
}

fn split(fr: [f64; 3]) -> (f64, f64, f64) {
    (fr[0], fr[1], fr[2])
}

/// Real training and held-out pools of a text source.
pub fn text_pools(source: &Source, seed: u64) -> Result<(Corpus, Corpus)> {
    let (corpus, fr) = match source {
        Source::ToyCorpus { spec, split } => {
            let spec = collapselab::corpus::ToyPopulationSpec { seed, ..spec.clone() };
            (synthesize_toy_corpus(&spec)?, *split)
        }
        Source::CorpusFile { path, format, split } => {
            let fmt = InputFormat::parse(format).ok_or_else(|| anyhow!("unknown corpus format {format:?}"))?;
            (ingest_documents(path, fmt)?, *split)
        }
        _ => return Err(anyhow!("not a text source")),
    };
    let (train, _validation, test) = split_corpus(&corpus, self::split(fr), seed)?;
    Ok((train, test))
}

pub fn feature_pool(source: &Source, seed: u64) -> Result<Vec<FeatureRecord<f64>>> {
    match source {
        Source::FeaturePopulation { spec } => {
            let spec = collapselab::imagemetrics::FeaturePopulationSpec { seed, ..spec.clone() };
            Ok(synthesize_feature_population(&spec)?)
        }
        Source::FeatureFile { path } => Ok(load_features(path)?),
        _ => Err(anyhow!("not a feature source")),
    }
}

fn finish<K: Kernel>(
    kernel: &K,
    cond: &Condition,
    config: &ChainConfig,
    mut run: ChainRun<K::Model, K::Record>,
    replicate: usize,
    out: Option<&Path>,
    mut evaluate: impl FnMut(&K::Model, &[K::Record], u32) -> Result<std::collections::BTreeMap<String, f64>>,
) -> Result<ChainOutcome> {
    let mut rows = Vec::new();
    for snap in &mut run.snapshots {
        let n = cond.eval_size.unwrap_or(config.size(0)).min(snap.synthetic.len());
        let values = evaluate(&snap.model, &snap.synthetic[..n], snap.generation)
            .with_context(|| format!("metrics of generation {}", snap.generation))?;
        snap.metrics = values.clone();
        rows.push(MetricRow { condition: cond.name.clone(), seed: config.seed, generation: snap.generation, values });
    }
    let run_dir = match out {
        Some(dir) => {
            let dir = dir.join(&cond.name).join(format!("replicate-{replicate}"));
            write_run_directory(&dir, kernel, config, &run)?;
            Some(dir)
        }
        None => None,
    };
    Ok(ChainOutcome {
        condition: cond.name.clone(),
        replicate,
        seed: config.seed,
        generations_completed: run.snapshots.len(),
        rows,
        error: run.error.map(|e| e.to_string()),
        run_dir,
    })
}

fn text_chain<K>(
    kernel: &K,
    cond: &Condition,
    pools: (Corpus, Corpus),
    seed: u64,
    replicate: usize,
    out: Option<&Path>,
    target: Option<&str>,
) -> Result<ChainOutcome>
where
    K: Kernel<Record = Document, Model = NGramModel>,
{
    let (train, heldout) = pools;
    let config = chain_config(cond, train.len(), seed);
    let run = run_chain(kernel, &train.documents, &config)?;
    let reference = TextReference::new(train, heldout, target);
    finish(kernel, cond, &config, run, replicate, out, |model, eval, _| {
        text_metrics(&reference, Some(model), eval, target, &cond.metrics)
    })
}

/// Runs replicate `replicate` of `cond`; `out` receives the run directory.
pub fn run_condition(cond: &Condition, master_seed: u64, replicate: usize, out: Option<&Path>) -> Result<ChainOutcome> {
    let seed = replicate_seed(master_seed, replicate);
    match &cond.kernel {
        KernelConfig::Text { order, add_k, sampler } => {
            let pools = text_pools(&cond.source, seed)?;
            let vocab = Arc::new(Vocabulary::of_corpus(&pools.0));
            let kernel = TextKernel { order: *order, add_k: *add_k, sampler: *sampler, vocab };
            text_chain(&kernel, cond, pools, seed, replicate, out, None)
        }
        KernelConfig::ConditionalText { order, add_k, sampler, context_sections, target_section } => {
            let pools = text_pools(&cond.source, seed)?;
            let kernel = ConditionalTextKernel {
                order: *order,
                add_k: *add_k,
                sampler: *sampler,
                vocab: Arc::new(Vocabulary::of_corpus(&pools.0)),
                contexts: Arc::new(pools.0.documents.clone()),
                context_sections: context_sections.clone(),
                target_section: target_section.clone(),
            };
            text_chain(&kernel, cond, pools, seed, replicate, out, Some(target_section))
        }
        KernelConfig::Population { mixture, temperature } => {
            let real = feature_pool(&cond.source, seed)?;
            let kernel = PopulationKernel { mixture: *mixture, temperature: *temperature };
            let config = chain_config(cond, real.len(), seed);
            let run = run_chain(&kernel, &real, &config)?;
            let reference = PopulationReference::new(real, seed)?;
            finish(&kernel, cond, &config, run, replicate, out, |model, output, _| {
                population_metrics(&reference, model, output, &cond.metrics)
            })
        }
    }
}

/// Effective worker count: the environment switch forces one.
pub fn worker_count(requested: Option<usize>) -> usize {
    if std::env::var(DETERMINISTIC_ENV).is_ok_and(|v| v == "1") {
        return 1;
    }
    requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())).max(1)
}

pub struct ExperimentOutcome {
    pub chains: Vec<ChainOutcome>,
    pub wall_clock_seconds: f64,
}

/// Runs every (condition, replicate) pair; results come back in config order
/// whatever the worker count. Failed chains carry their error.
pub fn run_experiment(config: &ExperimentConfig, workers: usize, artifacts: Option<&Path>) -> Result<ExperimentOutcome> {
    config.validate()?;
    let start = Instant::now();
    let jobs: Vec<(&Condition, usize)> =
        config.conditions.iter().flat_map(|c| (0..config.replicates).map(move |r| (c, r))).collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()?;
    let chains = pool.install(|| {
        jobs.par_iter()
            .map(|(c, r)| {
                run_condition(c, config.seed, *r, artifacts).unwrap_or_else(|e| ChainOutcome {
                    condition: c.name.clone(),
                    replicate: *r,
                    seed: replicate_seed(config.seed, *r),
                    generations_completed: 0,
                    rows: Vec::new(),
                    error: Some(format!("{e:#}")),
                    run_dir: None,
                })
            })
            .collect::<Vec<_>>()
    });
    Ok(ExperimentOutcome { chains, wall_clock_seconds: start.elapsed().as_secs_f64() })
}
