//! Batch front end: configuration, reports and command pipelines.

mod commands;
mod config;
mod report;

pub use commands::*;
pub use config::*;
pub use report::*;
