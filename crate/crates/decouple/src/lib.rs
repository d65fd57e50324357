//! Command-line companion of `decouple-core`: configuration files, CSV
//! ingestion, report and plot-data writers, and a parallel ensemble driver.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod config;
pub mod error;
pub mod ingest;
pub mod plot;
pub mod report;
pub mod sweep;
pub mod trail;

pub use error::{AppError, AppResult};
