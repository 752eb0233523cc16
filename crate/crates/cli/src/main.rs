use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use collapselab::corpus::{ingest_documents, synthesize_toy_corpus, write_documents, InputFormat, ToyPopulationSpec};
use collapselab::genkernel::NGramModel;
use collapselab::imagemetrics::{synthesize_feature_population, write_features, FeaturePopulationSpec};
use collapselab::textmetrics::MetricRow;
use collapselab_cli::evaluate::{text_metrics, TextReference};
use collapselab_cli::report::{compare_conditions, render_rows};
use collapselab_cli::{emit_plot_data, run_experiment, worker_count, write_outputs, ExperimentConfig, FigureSpec, MetricSet, ReportFormat, RunManifest};

#[derive(Parser)]
#[command(name = "collapselab", version, about = "Recursive synthetic-training experiments")]
struct Cli {
    /// Experiment config (run) or population spec (synth-corpus).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, value_enum)]
    format: Option<ReportFormat>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    ToyCorpus,
    FeaturePopulation,
}

#[derive(Subcommand)]
enum Command {
    /// Writes a seeded toy corpus or feature population.
    SynthCorpus {
        #[arg(long, value_enum)]
        kind: SynthKind,
    },
    /// Runs every condition of an experiment config.
    Run,
    /// Evaluates a corpus file outside a chain.
    Metrics {
        #[arg(long)]
        input: PathBuf,
        /// Real corpus used for retention, rare-tail, safety and overlap references.
        #[arg(long)]
        reference: PathBuf,
        /// Held-out real corpus for perplexity.
        #[arg(long)]
        heldout: Option<PathBuf>,
        /// Model snapshot (model.json) for perplexity.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        target_section: Option<String>,
        #[arg(long, value_delimiter = ',', default_value = "lexical")]
        metrics: Vec<MetricSet>,
    },
    /// Paired differences of conditions against a baseline.
    Compare {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        baseline: String,
        #[arg(long, value_delimiter = ',')]
        conditions: Vec<String>,
    },
    /// Per-panel series files from a completed run.
    PlotData {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        figures: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<bool> {
    let cli = Cli::parse();
    match &cli.command {
        Command::SynthCorpus { kind } => synth(&cli, *kind).map(|_| true),
        Command::Run => run(&cli),
        Command::Metrics { input, reference, heldout, model, target_section, metrics } => {
            let read = |p: &Path| ingest_documents(p, detect_format(p)).with_context(|| format!("reading {}", p.display()));
            let docs = read(input)?;
            let train = read(reference)?;
            let held = match heldout {
                Some(h) => read(h)?,
                None => train.clone(),
            };
            let model = match model {
                Some(p) => Some(NGramModel::from_snapshot(&fs::read_to_string(p)?)?),
                None => None,
            };
            let r = TextReference::new(train, held, target_section.as_deref());
            let values = text_metrics(&r, model.as_ref(), &docs.documents, target_section.as_deref(), metrics)?;
            let row = MetricRow { condition: input.display().to_string(), seed: cli.seed.unwrap_or(0), generation: 0, values };
            emit(&cli, &render_rows(&[row], cli.format.unwrap_or_default())?)?;
            Ok(true)
        }
        Command::Compare { run, baseline, conditions } => {
            let manifest = RunManifest::load(run)?;
            manifest.verify()?;
            let rows = manifest.rows(run)?;
            let conditions: Vec<String> = if conditions.is_empty() {
                manifest.conditions.iter().map(|c| c.name.clone()).filter(|c| c != baseline).collect()
            } else {
                conditions.clone()
            };
            emit(&cli, &compare_conditions(&rows, baseline, &conditions)?)?;
            Ok(true)
        }
        Command::PlotData { run, figures } => {
            let spec = figures.as_deref().map(FigureSpec::load).transpose()?;
            let out = cli.out.clone().unwrap_or_else(|| run.join("plot-data"));
            for p in emit_plot_data(run, spec.as_ref(), &out)? {
                println!("{}", p.display());
            }
            Ok(true)
        }
    }
}

fn detect_format(p: &Path) -> InputFormat {
    match p.extension().and_then(|e| e.to_str()) {
        Some("jsonl") => InputFormat::LineRecord,
        _ => InputFormat::SectionedText,
    }
}

/// Writes to `--out` when given, else stdout.
fn emit(cli: &Cli, text: &str) -> Result<()> {
    match &cli.out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn synth(cli: &Cli, kind: SynthKind) -> Result<()> {
    let spec_text = cli.config.as_deref().map(fs::read_to_string).transpose()?;
    match kind {
        SynthKind::ToyCorpus => {
            let mut spec: ToyPopulationSpec = match &spec_text {
                Some(t) => toml::from_str(t)?,
                None => ToyPopulationSpec::default(),
            };
            if let Some(s) = cli.seed {
                spec.seed = s;
            }
            let corpus = synthesize_toy_corpus(&spec)?;
            let fmt = match cli.format {
                Some(ReportFormat::Jsonl) => InputFormat::LineRecord,
                _ => InputFormat::SectionedText,
            };
            emit(cli, &write_documents(&corpus.documents, fmt))
        }
        SynthKind::FeaturePopulation => {
            let mut spec: FeaturePopulationSpec = match &spec_text {
                Some(t) => toml::from_str(t)?,
                None => FeaturePopulationSpec::default(),
            };
            if let Some(s) = cli.seed {
                spec.seed = s;
            }
            if cli.format == Some(ReportFormat::Jsonl) {
                bail!("feature populations are written as csv");
            }
            let records = synthesize_feature_population(&spec)?;
            let labels: Vec<String> = spec.labels.iter().filter(|l| !l.is_empty()).cloned().collect();
            emit(cli, &write_features(&records, &labels)?)
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    let path = cli.config.as_deref().context("run needs --config")?;
    let mut config = ExperimentConfig::load(path)?;
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    config.validate()?;
    let out = cli
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("runs").join(path.file_stem().unwrap_or_default()));
    let workers = worker_count(cli.workers);
    let artifacts = config.artifacts.then_some(out.as_path());
    let outcome = run_experiment(&config, workers, artifacts)?;
    let manifest = write_outputs(&config, &outcome, &out, cli.format.unwrap_or_default(), workers)?;
    for c in &outcome.chains {
        match &c.error {
            None => eprintln!("{} replicate {}: {} generations", c.condition, c.replicate, c.generations_completed),
            Some(e) => eprintln!("{} replicate {}: failed after {} generations: {e}", c.condition, c.replicate, c.generations_completed),
        }
    }
    eprintln!("wrote {}", out.join(collapselab_cli::report::MANIFEST_FILE).display());
    Ok(manifest.complete)
}
