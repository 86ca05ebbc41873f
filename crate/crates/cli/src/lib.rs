//! Experiment driver: grid configuration, replicated runs, aggregation and
//! reporting.

pub mod config;
pub mod experiment;
pub mod report;
pub mod theory;
