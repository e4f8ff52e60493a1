//! Ingestion, configuration, artifact persistence and the command
//! implementations behind the `survey-fda` binary.

pub mod artifact;
pub mod commands;
pub mod config;
pub mod ingest;
pub mod output;
