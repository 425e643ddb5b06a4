//! Experiment grids: configuration, execution, metrics and reports.

pub mod config;
pub mod metrics;
pub mod report;
pub mod runner;

pub use config::{BuiltEnv, EnvConfig, EnvKind, ExperimentConfig, GroundTruth, PolicySpec};
pub use metrics::{near_top_frequency, near_top_marks, policy_mismatch, relative_mse};
pub use report::{read_records, render_markdown, summarize, write_outputs, CellRecord, Summary, SummaryRow};
pub use runner::{run_experiment, true_value, DirectKind, EstimatorId, ExperimentReport, HybridKind, RunOptions};
