//! Scenario files, presets, task runners and the CSV/SVG writers behind them.

pub mod config;
pub mod csv;
pub mod dancona;
pub mod presets;
pub mod svg;
pub mod tasks;

use std::path::PathBuf;

use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::integrator::IntegrateError;
use crate::model::ModelError;

pub use config::{parse_config, ConfigError, ScenarioConfig, TaskConfig, TaskKind};
pub use tasks::{run_task, TaskOutput};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error("model error: {0}")]
    Model(#[from] ModelError),
    #[error("integration failed: {0}")]
    Integrate(#[from] IntegrateError),
    #[error("analysis failed: {0}")]
    Analysis(#[from] AnalysisError),
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Invalid(String),
    #[error("check failed: {0}")]
    Check(String),
}

impl ScenarioError {
    /// True for failures of the numerics rather than of the input.
    pub fn is_numerical(&self) -> bool {
        match self {
            ScenarioError::Integrate(_) | ScenarioError::Check(_) => true,
            ScenarioError::Analysis(e) => !matches!(
                e,
                AnalysisError::InvalidArgument(_) | AnalysisError::InadmissibleEffort { .. } | AnalysisError::Model(_)
            ),
            _ => false,
        }
    }
}
