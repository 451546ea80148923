//! Training loop, metrics, leave-one-subject-out experiments and reports.

mod config;
mod experiment;
mod metrics;
mod report;
mod train;

pub use config::{load_samples, DataSource, RunConfig, TrainConfig, SEED_ENV};
pub use experiment::{run_ablation, run_loocv, run_sweep, SweepGrid};
pub use metrics::{evaluate, Confusion, Metrics};
pub use report::{cell, emit_report, sweep_csv, Aggregate, EvalReport, ReportFormat, SubjectRow};
pub use train::{batches, train, TrainOutcome, Trainer};
