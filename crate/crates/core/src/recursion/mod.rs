//! Generation chains: generation 0 fits on real records, each later
//! generation refits from scratch on a training set composed from the previous
//! generation's output and, optionally, fresh real draws.

mod kernels;
mod rundir;

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::index;
use serde::{Deserialize, Serialize};

pub use kernels::{source_id, ConditionalTextKernel, KernelConfig, PopulationKernel, PopulationModel, TextKernel};
pub use rundir::{write_run_directory, RunManifest};

use crate::corpus::{Corpus, Provenance};
use crate::error::{Error, Result};
use crate::genkernel::Vocabulary;
use crate::imagemetrics::FeatureRecord;
use crate::mitigation::{FilterConfig, FilterLog};
use crate::rng;

/// Stream purposes under `(seed, t)`.
const PURPOSE_COMPOSE: u64 = 0;
const PURPOSE_FIT: u64 = 1;
const PURPOSE_SAMPLE: u64 = 2;

/// A record that can flow around a chain.
pub trait ChainRecord: Clone {
    fn provenance(&self) -> Provenance;
    fn id(&self) -> &str;
}

/// Kept indices after a filter pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub synthetic: Vec<usize>,
    /// `None` when the filter does not touch the real pool.
    pub real: Option<Vec<usize>>,
    pub log: FilterLog,
}

/// A surrogate generative kernel.
pub trait Kernel {
    type Record: ChainRecord;
    type Model;

    fn fit(&self, train: &[Self::Record], seed: u64) -> Result<Self::Model>;
    fn sample(&self, model: &Self::Model, n: usize, generation: u32, seed: u64) -> Result<Vec<Self::Record>>;
    fn filter(&self, config: &FilterConfig, synthetic: &[Self::Record], real: &[Self::Record]) -> Result<Selection>;
    fn model_snapshot(&self, model: &Self::Model) -> Result<String>;
    fn write_records(&self, records: &[Self::Record]) -> Result<String>;
    fn records_extension(&self) -> &'static str;
}

/// Configuration of one chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    /// Last generation index; the chain runs generations `0..=generations`.
    pub generations: usize,
    /// Training-set size per generation. A single entry applies to all.
    pub sizes: Vec<usize>,
    /// Real fraction per generation (entry 0 is ignored: generation 0 is all real).
    /// A single entry applies to all.
    #[serde(default = "zero_fraction")]
    pub real_fraction: Vec<f64>,
    #[serde(default)]
    pub filter: Option<FilterConfig>,
    pub kernel: KernelConfig,
    pub seed: u64,
}

fn zero_fraction() -> Vec<f64> {
    vec![0.0]
}

fn broadcast<T: Copy>(v: &[T], t: usize) -> T {
    if v.len() == 1 {
        v[0]
    } else {
        v[t]
    }
}

impl ChainConfig {
    pub fn new(generations: usize, size: usize, kernel: KernelConfig, seed: u64) -> Self {
        Self { generations, sizes: vec![size], real_fraction: vec![0.0], filter: None, kernel, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.generations < 1 {
            return Err(Error::Config("a chain needs at least one generation after G0".into()));
        }
        let n = self.generations + 1;
        for (name, len) in [("sizes", self.sizes.len()), ("real_fraction", self.real_fraction.len())] {
            if len != 1 && len != n {
                return Err(Error::Config(format!("{name} has {len} entries; expected 1 or {n}")));
            }
        }
        if self.sizes.contains(&0) {
            return Err(Error::Config("sizes must be positive".into()));
        }
        if let Some(r) = self.real_fraction.iter().find(|r| !(0.0..=1.0).contains(*r)) {
            return Err(Error::Config(format!("real fraction {r} outside [0, 1]")));
        }
        Ok(())
    }

    /// Training-set size of generation `t`.
    pub fn size(&self, t: usize) -> usize {
        broadcast(&self.sizes, t)
    }

    /// Real fraction of generation `t`.
    pub fn real_fraction(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            broadcast(&self.real_fraction, t)
        }
    }

    /// Size of the synthetic output of generation `t`.
    pub fn output_size(&self, t: usize) -> usize {
        self.size((t + 1).min(self.generations))
    }

    /// Stable hash of the serialized config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        format!("{:016x}", rng::fnv1a(json.as_bytes()))
    }
}

/// Bookkeeping for one composed training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    pub generation: u32,
    pub total: usize,
    pub real: usize,
    pub synthetic: usize,
    pub real_available: usize,
    pub synthetic_available: usize,
    /// Training records per provenance label.
    pub provenance: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub filter: Option<FilterLog>,
}

fn draw<R: Clone>(pool: &[R], candidates: Option<&[usize]>, n: usize, what: &str, seed: u64) -> Result<Vec<R>> {
    let available = candidates.map_or(pool.len(), <[usize]>::len);
    if n > available {
        return Err(Error::Insufficient { what: what.into(), needed: n, available });
    }
    let mut picked = index::sample(&mut rng::stream(seed, 0), available, n).into_vec();
    picked.sort_unstable();
    Ok(picked
        .into_iter()
        .map(|i| pool[candidates.map_or(i, |c| c[i])].clone())
        .collect())
}

/// Builds generation `t`'s training set: `⌊ρ·total⌋` fresh real draws and the
/// remainder from the synthetic pool, both without replacement. With a filter,
/// selection runs before counting.
pub fn compose_training_set<K: Kernel>(
    kernel: &K,
    t: u32,
    real_pool: &[K::Record],
    synthetic_pool: &[K::Record],
    real_fraction: f64,
    total: usize,
    filter: Option<&FilterConfig>,
    seed: u64,
) -> Result<(Vec<K::Record>, Composition)> {
    if !(0.0..=1.0).contains(&real_fraction) {
        return Err(Error::Range(format!("real fraction {real_fraction} outside [0, 1]")));
    }
    let n_real = ((real_fraction * total as f64) + 1e-9).floor() as usize;
    let n_synth = total - n_real;
    let selection = match filter {
        Some(cfg) if !synthetic_pool.is_empty() => Some(kernel.filter(cfg, synthetic_pool, real_pool)?),
        _ => None,
    };
    let real_keep = selection.as_ref().and_then(|s| s.real.as_deref());
    let synth_keep = selection.as_ref().map(|s| s.synthetic.as_slice());
    let real_what = if real_keep.is_some() { "filtered real pool" } else { "real pool" };
    let synth_what = if synth_keep.is_some() { "filtered synthetic pool" } else { "synthetic pool" };
    let mut train = draw(real_pool, real_keep, n_real, real_what, rng::derive(seed, 0))?;
    train.extend(draw(synthetic_pool, synth_keep, n_synth, synth_what, rng::derive(seed, 1))?);
    let mut provenance = BTreeMap::new();
    for r in &train {
        *provenance.entry(r.provenance().to_string()).or_insert(0) += 1;
    }
    let composition = Composition {
        generation: t,
        total,
        real: n_real,
        synthetic: n_synth,
        real_available: real_keep.map_or(real_pool.len(), <[usize]>::len),
        synthetic_available: synth_keep.map_or(synthetic_pool.len(), <[usize]>::len),
        provenance,
        filter: selection.map(|s| s.log),
    };
    Ok((train, composition))
}

/// One generation of a chain.
#[derive(Debug, Clone)]
pub struct GenerationSnapshot<M, R> {
    pub generation: u32,
    pub model: M,
    pub synthetic: Vec<R>,
    pub composition: Composition,
    pub metrics: BTreeMap<String, f64>,
}

/// Completed snapshots plus the error that stopped the chain, if any.
#[derive(Debug)]
pub struct ChainRun<M, R> {
    pub snapshots: Vec<GenerationSnapshot<M, R>>,
    pub error: Option<Error>,
}

impl<M, R> ChainRun<M, R> {
    pub fn is_complete(&self) -> bool {
        self.error.is_none()
    }

    /// Returns the snapshots, or the error if the chain aborted.
    pub fn into_result(self) -> Result<Vec<GenerationSnapshot<M, R>>> {
        match self.error {
            Some(e) => Err(e),
            None => Ok(self.snapshots),
        }
    }
}

/// Runs a chain with an explicit kernel.
pub fn run_chain<K: Kernel>(kernel: &K, real_pool: &[K::Record], config: &ChainConfig) -> Result<ChainRun<K::Model, K::Record>> {
    config.validate()?;
    if real_pool.len() < config.size(0) {
        return Err(Error::Insufficient { what: "real pool".into(), needed: config.size(0), available: real_pool.len() });
    }
    let mut snapshots: Vec<GenerationSnapshot<K::Model, K::Record>> = Vec::with_capacity(config.generations + 1);
    for t in 0..=config.generations {
        let step = (|| {
            let gen_seed = |purpose| rng::derive_path(config.seed, &[t as u64, purpose]);
            let previous: &[K::Record] = snapshots.last().map_or(&[], |s| s.synthetic.as_slice());
            let (train, composition) = compose_training_set(
                kernel,
                t as u32,
                real_pool,
                previous,
                config.real_fraction(t),
                config.size(t),
                if t == 0 { None } else { config.filter.as_ref() },
                gen_seed(PURPOSE_COMPOSE),
            )?;
            let model = kernel.fit(&train, gen_seed(PURPOSE_FIT))?;
            let synthetic = kernel.sample(&model, config.output_size(t), t as u32, gen_seed(PURPOSE_SAMPLE))?;
            Ok(GenerationSnapshot { generation: t as u32, model, synthetic, composition, metrics: BTreeMap::new() })
        })();
        match step {
            Ok(s) => snapshots.push(s),
            Err(e) => return Ok(ChainRun { snapshots, error: Some(e) }),
        }
    }
    Ok(ChainRun { snapshots, error: None })
}

/// Text chain over a real corpus; the vocabulary is fixed to the real pool's.
pub fn run_text_chain(real: &Corpus, config: &ChainConfig) -> Result<ChainRun<crate::genkernel::NGramModel, crate::corpus::Document>> {
    let vocab = Arc::new(Vocabulary::of_corpus(real));
    match &config.kernel {
        KernelConfig::Text { order, add_k, sampler } => {
            let kernel = TextKernel { order: *order, add_k: *add_k, sampler: *sampler, vocab };
            run_chain(&kernel, &real.documents, config)
        }
        KernelConfig::ConditionalText { order, add_k, sampler, context_sections, target_section } => {
            let kernel = ConditionalTextKernel {
                order: *order,
                add_k: *add_k,
                sampler: *sampler,
                vocab,
                contexts: Arc::new(real.documents.clone()),
                context_sections: context_sections.clone(),
                target_section: target_section.clone(),
            };
            run_chain(&kernel, &real.documents, config)
        }
        KernelConfig::Population { .. } => Err(Error::Config("population kernel on a text pool".into())),
    }
}

/// Population chain over real feature records.
pub fn run_population_chain(real: &[FeatureRecord<f64>], config: &ChainConfig) -> Result<ChainRun<PopulationModel, FeatureRecord<f64>>> {
    match &config.kernel {
        KernelConfig::Population { mixture, temperature } => {
            let kernel = PopulationKernel { mixture: *mixture, temperature: *temperature };
            run_chain(&kernel, real, config)
        }
        _ => Err(Error::Config("text kernel on a feature pool".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::genkernel::{MixtureFitConfig, SamplerConfig};
    use crate::imagemetrics::{synthesize_feature_population, FeaturePopulationSpec};
    use std::collections::BTreeSet;

    fn pool(prefix: &str, n: usize, provenance: Provenance) -> Vec<Document> {
        (0..n)
            .map(|i| Document::from_text(format!("{prefix}{i}"), &format!("word{} report {i}", i % 7), provenance).unwrap())
            .collect()
    }

    fn text_kernel(docs: &[Document]) -> TextKernel {
        let corpus: Corpus = docs.iter().cloned().collect();
        TextKernel { order: 3, add_k: 0.01, sampler: SamplerConfig::UNCONDITIONAL, vocab: Arc::new(Vocabulary::of_corpus(&corpus)) }
    }

    #[test]
    fn mixed_counts() {
        let real = pool("r", 5000, Provenance::Real);
        let synth = pool("s", 5000, Provenance::Synthetic(0));
        let k = text_kernel(&real);
        let (train, c) = compose_training_set(&k, 1, &real, &synth, 0.25, 5000, None, 3).unwrap();
        assert_eq!((c.real, c.synthetic), (1250, 3750));
        assert_eq!(train.len(), 5000);
        assert_eq!(c.provenance["real"], 1250);
        assert_eq!(c.provenance["synthetic:0"], 3750);
    }

    #[test]
    fn half_split_exhaustive() {
        let real = pool("r", 10, Provenance::Real);
        let synth = pool("s", 10, Provenance::Synthetic(0));
        let k = text_kernel(&real);
        for seed in 0..20 {
            let (train, _) = compose_training_set(&k, 1, &real, &synth, 0.5, 10, None, seed).unwrap();
            let reals = train.iter().filter(|d| d.provenance.is_real()).count();
            assert_eq!(reals, 5);
            assert_eq!(train.len() - reals, 5);
            let ids: BTreeSet<_> = train.iter().map(|d| d.id.clone()).collect();
            assert_eq!(ids.len(), 10);
        }
    }

    #[test]
    fn all_real_is_the_real_pool() {
        let real = pool("r", 40, Provenance::Real);
        let synth = pool("s", 40, Provenance::Synthetic(0));
        let k = text_kernel(&real);
        let (train, c) = compose_training_set(&k, 2, &real, &synth, 1.0, 40, None, 9).unwrap();
        assert_eq!(c.synthetic, 0);
        let got: BTreeSet<_> = train.iter().map(|d| d.id.clone()).collect();
        let want: BTreeSet<_> = real.iter().map(|d| d.id.clone()).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn insufficient_pool_names_deficit() {
        let real = pool("r", 3, Provenance::Real);
        let synth = pool("s", 10, Provenance::Synthetic(0));
        let k = text_kernel(&real);
        let err = compose_training_set(&k, 1, &real, &synth, 0.5, 10, None, 0).unwrap_err();
        assert!(matches!(err, Error::Insufficient { needed: 5, available: 3, .. }));
        assert!(err.to_string().contains("deficit 2"));
    }

    fn small_text_config(generations: usize, size: usize) -> (Corpus, ChainConfig) {
        let real: Corpus = pool("r", size, Provenance::Real).into_iter().collect();
        (real, ChainConfig::new(generations, size, KernelConfig::text(), 5))
    }

    #[test]
    fn closed_loop_purity() {
        let (real, cfg) = small_text_config(4, 60);
        let run = run_text_chain(&real, &cfg).unwrap().into_result().unwrap();
        assert_eq!(run.len(), 5);
        for s in &run[1..] {
            let want = Provenance::Synthetic(s.generation - 1).to_string();
            assert_eq!(s.composition.provenance.keys().collect::<Vec<_>>(), vec![&want]);
            assert_eq!(s.composition.total, 60);
            assert!(s.synthetic.iter().all(|d| d.provenance == Provenance::Synthetic(s.generation)));
        }
    }

    #[test]
    fn greedy_memorized_sequence_survives() {
        let real: Corpus = vec![Document::from_text("r0", "A b c", Provenance::Real).unwrap()].into_iter().collect();
        let kernel = KernelConfig::Text { order: 3, add_k: 0.01, sampler: SamplerConfig::greedy() };
        let cfg = ChainConfig::new(1, 1, kernel, 1);
        let run = run_text_chain(&real, &cfg).unwrap().into_result().unwrap();
        assert_eq!(run[1].synthetic[0].text(), real.documents[0].text());
    }

    #[test]
    fn seed_isolation() {
        let (real, mut cfg) = small_text_config(3, 50);
        let a = run_text_chain(&real, &cfg).unwrap().into_result().unwrap();
        cfg.real_fraction = vec![0.0, 0.0, 0.0, 0.5];
        let b = run_text_chain(&real, &cfg).unwrap().into_result().unwrap();
        for t in 0..3 {
            assert_eq!(a[t].synthetic, b[t].synthetic);
            assert_eq!(a[t].model, b[t].model);
        }
        assert_ne!(a[3].composition, b[3].composition);
        cfg.real_fraction = vec![0.0];
        cfg.seed = 6;
        let c = run_text_chain(&real, &cfg).unwrap().into_result().unwrap();
        assert_ne!(a[1].synthetic, c[1].synthetic);
    }

    #[test]
    fn volume_schedule_sizes() {
        let spec = FeaturePopulationSpec { dim: 2, count: 5000, ..Default::default() };
        let real = synthesize_feature_population(&spec).unwrap();
        let mixture = MixtureFitConfig { components: 1, ..Default::default() };
        let mut cfg = ChainConfig::new(4, 5000, KernelConfig::Population { mixture, temperature: 1.0 }, 2);
        cfg.sizes = vec![5000, 10000, 15000, 20000, 25000];
        let run = run_population_chain(&real, &cfg).unwrap().into_result().unwrap();
        let totals: Vec<_> = run.iter().map(|s| s.composition.total).collect();
        assert_eq!(totals, cfg.sizes);
        let outputs: Vec<_> = run.iter().map(|s| s.synthetic.len()).collect();
        assert_eq!(outputs, vec![10000, 15000, 20000, 25000, 25000]);
    }

    #[test]
    fn fit_failure_keeps_completed_generations() {
        let spec = FeaturePopulationSpec { dim: 2, count: 20, ..Default::default() };
        let real = synthesize_feature_population(&spec).unwrap();
        let mixture = MixtureFitConfig { components: 4, ..Default::default() };
        let mut cfg = ChainConfig::new(2, 20, KernelConfig::Population { mixture, temperature: 1.0 }, 2);
        cfg.sizes = vec![20, 2, 2];
        let run = run_population_chain(&real, &cfg).unwrap();
        assert_eq!(run.snapshots.len(), 1);
        assert!(run.error.is_some());
    }

    #[test]
    fn config_validation() {
        let mut cfg = ChainConfig::new(0, 10, KernelConfig::text(), 0);
        assert!(cfg.validate().is_err());
        cfg.generations = 2;
        cfg.real_fraction = vec![1.5];
        assert!(cfg.validate().is_err());
        cfg.real_fraction = vec![0.0, 0.1];
        assert!(cfg.validate().is_err());
        cfg.real_fraction = vec![0.0];
        cfg.sizes = vec![0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn run_directory_layout() {
        let (real, cfg) = small_text_config(1, 20);
        let run = run_text_chain(&real, &cfg).unwrap();
        let kernel = text_kernel(&real.documents);
        let dir = std::env::temp_dir().join(format!("collapselab-rundir-{}", std::process::id()));
        let manifest = write_run_directory(&dir, &kernel, &cfg, &run).unwrap();
        assert_eq!(manifest.generations_completed, 2);
        for f in ["gen-0/model.json", "gen-1/synthetic.txt", "gen-1/composition.json", "gen-0/metrics.json", "manifest.json"] {
            assert!(dir.join(f).is_file(), "{f}");
        }
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
