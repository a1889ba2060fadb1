//! Configuration, caching and result documents behind the `kinkgate` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifact;
pub mod commands;
pub mod config;
pub mod error;
pub mod report;

pub use commands::{execute, Command, Context};
pub use config::ExperimentConfig;
pub use error::{CliError, Result, EXIT_CRITERION};
pub use report::ResultDocument;
