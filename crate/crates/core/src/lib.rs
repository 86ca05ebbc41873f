pub mod classifier;
pub mod data;
pub mod engine;
pub mod error;
pub mod label;
pub mod query;
pub mod stat;
pub mod theory;
