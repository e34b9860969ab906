//! Experiment harness for blind performance prediction: configuration,
//! dataset generation, the headline experiments and the external denoiser
//! protocol.

pub mod config;
pub mod error;
pub mod experiments;
pub mod output;
pub mod protocol;

pub use config::{ExperimentConfig, ExperimentKind, SigmaChoice};
pub use error::{CliError, CliResult};
