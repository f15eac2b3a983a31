//! Command-line front end for the state comparison amplifier model: grid
//! sweeps, count-table estimation, figure datasets and a self-check.

pub mod config;
pub mod dataset;
pub mod error;
pub mod estimate;
pub mod figure;
pub mod selfcheck;
pub mod sweep;

pub use config::Config;
pub use dataset::{Dataset, Format, Value};
pub use error::{CliError, CliResult};
