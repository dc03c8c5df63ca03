//! Configuration parsing and batch dispatch for the `vfd` command-line tool.

// `!(x > 0.0)` guards are written that way so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;

pub use config::{parse_config, Command, ConfigError, RunConfig};
pub use run::{config_hash, run, Manifest, RunError, RunOptions};
