//! File IO, configuration and the end-to-end comparison run:
//! load → register → tone → edge → threshold → invert → compose → measure →
//! report.

mod config;
mod io;
mod report;
mod run;
pub mod schema;
mod synth;

use thiserror::Error;

pub use config::{OperatorKind, OutputFormat, PipelineConfig, DEFAULT_THRESHOLD};
pub use io::{load_image, rgb_luminance, rgb_to_luminance, save_image, ImageFormat, ImageIoError};
pub use report::{
    InputInfo, Inputs, Parameters, RegistrationEcho, RegistrationSource, RunReport, REPORT_SCHEMA,
    VERSION,
};
pub use run::{edge_layer, registration_for, run, REPORT_FILE};
pub use synth::{write_synthetic_scene, SynthOutputs};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{stage}: {message}")]
    Io {
        stage: &'static str,
        message: String,
    },
    #[error("{stage}: {message}")]
    Stage {
        stage: &'static str,
        message: String,
    },
}

impl PipelineError {
    pub(crate) fn io(stage: &'static str, e: impl std::fmt::Display) -> Self {
        PipelineError::Io {
            stage,
            message: e.to_string(),
        }
    }

    pub(crate) fn stage(stage: &'static str, e: impl std::fmt::Display) -> Self {
        PipelineError::Stage {
            stage,
            message: e.to_string(),
        }
    }

    /// Process exit code: 2 config, 3 IO, 4 numeric or stage failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Io { .. } => 3,
            PipelineError::Stage { .. } => 4,
        }
    }
}
