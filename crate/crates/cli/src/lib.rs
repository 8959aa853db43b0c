//! Config-driven runner for the `pfgmpp` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod run;
pub mod verify;

pub use config::{Mode, Overrides, RunConfig};
pub use error::CliError;
pub use run::{run, RunSummary};
