//! Experiment orchestration for trainable quantum embeddings in ligand-based
//! virtual screening.
//!
//! * [`data`]: feature CSV schema, class-ratio sampling, stratified splits.
//! * [`config`]: experiment configuration and its key-value file format.
//! * [`run`]: per-seed execution of every condition and the two batteries.
//! * [`report`]: aggregation, text tables and JSON records.
//! * [`synth`]: seeded synthetic feature tables.

pub mod config;
pub mod data;
pub mod error;
pub mod report;
pub mod run;
pub mod synth;

pub use config::{Condition, ExperimentConfig};
pub use error::{PipelineError, Result};
pub use report::RunReport;
