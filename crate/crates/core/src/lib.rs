//! Hybrid-field channel synthesis, AMP/OAMP reconstruction and blind
//! SURE-based performance prediction for compressively sensed arrays.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dataset;
pub mod denoise;
pub mod dft;
pub mod error;
pub mod field;
pub mod linalg;
pub mod measurement;
pub mod noise;
pub mod oracle;
pub mod recon;
pub mod stats;
pub mod sure;

pub use config::ScenarioConfig;
pub use denoise::{Denoiser, DenoiserSpec};
pub use error::{Error, Result};
pub use field::{ChannelInstance, Path, PathSet, Regime};
pub use measurement::{MeasurementEnsemble, Pilots};
pub use noise::{NoiseEstimate, NoiseMethod, VscMatrix};
pub use oracle::{blind_scope, Oracle};
pub use recon::{Algorithm, DecorrelatedLe, IterateState, PipelineOptions, Problem, SigmaSource};
pub use stats::{EstimatorReport, NormalityStats, QqPoint};
pub use sure::{SigmaTag, SurePrediction, TruthEval};
