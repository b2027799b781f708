//! Benchmark harness for uncertainty scores on binary tabular classification.

pub mod bench;
pub mod data;
pub mod error;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod scores;
pub mod tasks;

pub use error::{Error, Result};
