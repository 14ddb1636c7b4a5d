//! Command-line front end: configuration, scenario execution and output.

pub mod config;
pub mod error;
pub mod output;
pub mod run;
pub mod selftest;

pub use config::{parse_config, Mode, Overrides, ScenarioConfig};
pub use error::{CliError, CliResult};
pub use run::{run_scenario, RunOutcome};
