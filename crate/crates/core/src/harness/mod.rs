//! Experiment orchestration: training, evaluation, reports and caching.

mod config;
mod pipeline;
mod report;
mod training;

pub use config::{ExperimentConfig, ReferenceConfig};
pub use pipeline::{config_hash, content_hash, run_experiment, Pipeline, SetAccuracy, Staged};
pub use report::{emit_report, mean_std, EvalReport, MethodReport, ReportFormat, RunMetadata, SeedAccuracy, SplitResult};
pub use training::{evaluate_set, train_main};
