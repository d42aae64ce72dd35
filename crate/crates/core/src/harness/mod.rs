//! Experiment driver: configuration, the `alpha × trial` grid, CSV output, and
//! aggregation.

pub mod aggregate;
pub mod config;
pub mod experiment;

pub use aggregate::{aggregate, write_aggregate_csv, AggregateRow, Summary};
pub use config::{sample_size, ExperimentConfig, KernelKind};
pub use experiment::{read_csv, run_experiment, trial_seed, write_csv, ResultRow, CSV_HEADER};
