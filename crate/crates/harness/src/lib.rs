//! Monte Carlo experiments, result tables and the `fim-mimo` command-line
//! driver for capacity optimization between flexible intelligent metasurfaces.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod scenario;
pub mod table;

pub use config::ExperimentConfig;
pub use error::HarnessError;
pub use experiment::{convergence_trace_experiment, run, run_experiment, ExperimentOutput};
pub use table::{Format, ResultTable, TraceTable};
