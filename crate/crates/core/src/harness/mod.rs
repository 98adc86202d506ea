//! Experiment orchestration behind the `vfair` binary.
//!
//! A TOML [`ExperimentConfig`] names a dataset, a model and the methods to
//! train. [`run_experiment`] trains every method for every seed on a seeded
//! train/test split and evaluates the selected epoch on the test side for
//! each sensitive attribute.

mod config;
mod report;
mod run;

pub use config::{
    DataConfig, DataSource, EpochSelection, EvalConfig, ExperimentConfig, Method, ModelConfig, TrainConfig,
};
pub use report::{
    aggregate, emit_loss_curve, load_records, loss_curve, write_aggregate_csv, write_outputs, write_trace_csv,
    AggregateRow,
};
pub use run::{
    mean_loss, run_experiment, run_experiment_on, select_harmless_epoch, training_split, EvalPoint, RunRecord,
    RunStatus, StepTrace,
};
