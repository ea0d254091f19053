//! Config-driven experiments and the `esr` command-line tool.

pub mod cli;
pub mod config;
pub mod output;
pub mod scenario;
pub mod validate;

pub use cli::{run_cli, run_cli_with};
pub use config::{ExperimentConfig, OutputFormat, ResolvedConfig, SweepSpec};
pub use scenario::{evaluate_row, run_sweep, spin_scenario, ResultRow};
