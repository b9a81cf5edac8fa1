//! File formats, configuration and threaded drivers around `ssmkit-core`,
//! plus the `ssmkit` command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod output;
pub mod parallel;

pub use config::{ConfigError, JobConfig};
