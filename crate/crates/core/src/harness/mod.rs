//! Configuration, data ingestion, built-in scenarios and report writing.

pub mod config;
pub mod ingest;
pub mod report;
pub mod run;
pub mod scenario;
