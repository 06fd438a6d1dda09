//! Configuration parsing and the `heteroclinic` command-line run.

mod config;
mod run;

pub use config::{
    apply_overrides, parse_config, serialize_config, ConfigError, DiagnosticOptions, OutputPaths, PotentialChoice,
    PotentialConfig, RunConfig,
};
pub use run::{
    execute, run, write_outputs, write_plotdata, ComparisonSummary, RunError, RunOutcome, RunReport, EXIT_CERTIFIED,
    EXIT_ERROR, EXIT_UNCERTIFIED,
};
