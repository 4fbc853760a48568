//! Seeded experiment runs over the `ssp-core` learners: configuration,
//! parallel execution, on-disk layout, aggregation and SVG charts.

pub mod aggregate;
pub mod config;
pub mod plot;
pub mod runner;

mod error;

pub use error::{BenchError, Result};
