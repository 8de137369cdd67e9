//! File-based front end for the `mltrp` library: CSV ingestion, seeded demo
//! instances, and JSON/CSV result emission.

pub mod commands;
pub mod demo;
pub mod error;
pub mod io;

pub use commands::RunConfig;
pub use error::{CliError, Result};
