//! Reproducible experiment runs: configuration, dispatch, manifests and plot scripts.
//!
//! Exit codes: 0 when every recorded check passes, 1 on a property failure, 2 on a
//! configuration error, 3 when a simulation produces a non-finite density.

pub mod config;
pub mod manifest;
pub mod plots;
pub mod run;

use std::path::PathBuf;

use thiserror::Error;

use crate::commutators::CommutatorError;
use crate::geometry::GeometryError;
use crate::regularization::RegularizationError;
use crate::renormalization::RenormError;
use crate::spde::SpdeError;

pub use config::{Check, RunConfig};
pub use manifest::{content_hash, write_atomic, Artifact, CheckOutcome, RunManifest, MANIFEST_FILE};
pub use plots::emit_plots;
pub use run::{run_experiment, RunOutcome};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BLOWUP: i32 = 3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    ConfigInvalid(String),
    #[error("check failed: {0}")]
    CheckFailed(String),
    #[error("no plottable CSV files in {}", .0.display())]
    MissingArtifacts(PathBuf),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Regularization(#[from] RegularizationError),
    #[error(transparent)]
    Commutator(#[from] CommutatorError),
    #[error(transparent)]
    Spde(#[from] SpdeError),
    #[error(transparent)]
    Renorm(#[from] RenormError),
}

fn spde_code(e: &SpdeError) -> i32 {
    match e {
        SpdeError::NonFiniteState { .. } => EXIT_BLOWUP,
        _ => EXIT_CONFIG,
    }
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::CheckFailed(_) => EXIT_FAIL,
            Self::Regularization(RegularizationError::CoverageFailure { .. }) => EXIT_FAIL,
            Self::Spde(e) | Self::Renorm(RenormError::Spde(e)) => spde_code(e),
            Self::Renorm(
                RenormError::InequalityViolation { .. }
                | RenormError::UnboundedRenormFunction { .. }
                | RenormError::DerivativeMismatch(_),
            ) => EXIT_FAIL,
            _ => EXIT_CONFIG,
        }
    }
}
