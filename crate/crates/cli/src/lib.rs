//! Command-line front end for seamforge: argument parsing, the end-to-end
//! pipeline, and error reporting.

pub mod app;
pub mod error;
pub mod pipeline;

pub use app::{run, Cli};
pub use error::{CliError, CliResult, EXIT_DOMAIN, EXIT_IO, EXIT_OK};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineOutput, ScorerChoice, ScorerKind};
