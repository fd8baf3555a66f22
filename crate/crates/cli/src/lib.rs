//! Command-line pipeline around the `deconfounder` library.
//!
//! Every subcommand writes `manifest.json`, `report.txt` and `report.json`
//! into its output directory; model-fitting commands add `model.json`,
//! `mask.json`, `check.json`, `causes.csv` and `confounders.csv`.

pub mod commands;
pub mod error;
pub mod manifest;
pub mod scenarios;
pub mod stages;

pub use commands::{run, run_effects_pipeline, Cli, Command, Outcome};
pub use error::{CliError, CliResult, EXIT_GATE, EXIT_INPUT, EXIT_NUMERIC, EXIT_OK};
