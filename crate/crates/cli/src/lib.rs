//! Batch front-end for `lqrk-core`: scenario files in, trajectory CSV and
//! diagnostics JSON out.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod verify;

pub use config::{parse_config, Scenario};
pub use error::CliError;
pub use run::{run_scenario, RunOptions, RunReport};
pub use verify::{run_verify_suite, SuiteReport};
