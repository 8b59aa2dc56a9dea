//! Configuration, experiment orchestration, persistence, and reporting.

pub mod config;
pub mod experiments;
pub mod records;
pub mod report;

pub use config::RunConfig;
pub use records::{read_records, Recorder, RunRecord};
