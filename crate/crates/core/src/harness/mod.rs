//! Monte-Carlo driver: channel drops, goodput accounting, aggregation and
//! file output, plus the acceptance property suites.

pub mod aggregate;
pub mod config;
pub mod output;
pub mod run;
pub mod validate;

pub use aggregate::{aggregate, Summary};
pub use config::{ExperimentConfig, Schedule, Scheme};
pub use output::{write_all, OutputPaths};
pub use run::{goodput, run_drop, run_experiment, DropRecord, StreamRecord};
