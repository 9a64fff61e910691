//! Configuration, data ingestion and run orchestration for the `iwar`
//! command-line tool.

pub mod config;
pub mod data;
pub mod error;
pub mod run;

pub use config::{Mode, RunConfig};
pub use error::{CliError, CliResult};
pub use run::{execute, Invocation, Outcome};
