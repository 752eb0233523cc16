//! Experiment runner for collapselab: TOML-configured condition grids,
//! per-generation metric reports, comparisons and plot series.

pub mod config;
pub mod evaluate;
pub mod experiment;
pub mod report;

pub use config::{Condition, ExperimentConfig, MetricSet, Source};
pub use experiment::{run_condition, run_experiment, worker_count, ChainOutcome, ExperimentOutcome};
pub use report::{emit_plot_data, write_outputs, FigureSpec, ReportFormat, RunManifest};
