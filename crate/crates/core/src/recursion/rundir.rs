use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ChainConfig, ChainRun, Kernel, PURPOSE_COMPOSE, PURPOSE_FIT, PURPOSE_SAMPLE};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationSeeds {
    pub generation: u32,
    pub compose: u64,
    pub fit: u64,
    pub sample: u64,
}

/// Top-level record of a chain run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub master_seed: u64,
    pub generations_completed: usize,
    pub reset: String,
    pub seeds: Vec<GenerationSeeds>,
    pub error: Option<String>,
    pub config: ChainConfig,
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `gen-<t>/{model.json, synthetic.<ext>, composition.json, metrics.json}`
/// for every completed generation plus `manifest.json` at the root.
pub fn write_run_directory<K: Kernel>(
    dir: &Path,
    kernel: &K,
    config: &ChainConfig,
    run: &ChainRun<K::Model, K::Record>,
) -> Result<RunManifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut seeds = Vec::new();
    for snap in &run.snapshots {
        let t = snap.generation;
        let gen_dir = dir.join(format!("gen-{t}"));
        fs::create_dir_all(&gen_dir).map_err(|e| Error::io(&gen_dir, e))?;
        write(&gen_dir.join("model.json"), &kernel.model_snapshot(&snap.model)?)?;
        write(
            &gen_dir.join(format!("synthetic.{}", kernel.records_extension())),
            &kernel.write_records(&snap.synthetic)?,
        )?;
        write(&gen_dir.join("composition.json"), &serde_json::to_string_pretty(&snap.composition)?)?;
        write(&gen_dir.join("metrics.json"), &serde_json::to_string_pretty(&snap.metrics)?)?;
        let s = |p| rng::derive_path(config.seed, &[t as u64, p]);
        seeds.push(GenerationSeeds { generation: t, compose: s(PURPOSE_COMPOSE), fit: s(PURPOSE_FIT), sample: s(PURPOSE_SAMPLE) });
    }
    let manifest = RunManifest {
        config_hash: config.hash(),
        master_seed: config.seed,
        generations_completed: run.snapshots.len(),
        reset: "from-scratch refit".into(),
        seeds,
        error: run.error.as_ref().map(ToString::to_string),
        config: config.clone(),
    };
    write(&dir.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}
