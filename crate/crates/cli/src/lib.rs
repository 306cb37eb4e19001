//! Command implementations behind the `memi` binary: `fit`, `simulate`,
//! `compare` and `summary`, plus the formats of the files they write.

pub mod commands;
pub mod error;
pub mod output;

pub use commands::{
    compare, fit, masked_report, simulate, summary, CompareOutcome, FitArgs, FitOutcome, Scenario,
    SimulateArgs, SummaryArgs,
};
pub use error::CliError;
