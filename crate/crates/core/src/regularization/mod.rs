//! Partitions of unity, mollifiers, localization and the pullback-extension operator.

pub mod localize;
pub mod mollifier;
pub mod partition;

use thiserror::Error;

use crate::geometry::{GeometryError, ModelPoint};

pub use localize::{
    localize_scalar, localize_tensor, localize_vector, localized_aux_terms, pullback_extend,
    reconstruct_global, smooth_local, AuxTerms, LocalizedField, Rank,
};
pub use mollifier::{convolve, mollify, Kernel, Mollifier};
pub use partition::{make_partition, PartitionOfUnity};

/// The ε values used by every convergence study, clipped by the admissible maximum.
pub const EPS_LADDER: [f64; 5] = [0.16, 0.08, 0.04, 0.02, 0.01];

pub fn clipped_ladder(limit: f64) -> Vec<f64> {
    EPS_LADDER.iter().copied().filter(|&e| e < limit).collect()
}

#[derive(Debug, Error)]
pub enum RegularizationError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("partition bumps sum to {total:e} at model point {point:?}")]
    CoverageFailure { total: f64, point: ModelPoint },
    #[error("epsilon {eps} must be below {limit}")]
    EpsilonTooLarge { eps: f64, limit: f64 },
    #[error("epsilon {0} must be positive and finite")]
    InvalidEpsilon(f64),
    #[error("margin {0} must be positive and finite")]
    InvalidMargin(f64),
    #[error("support of a field on chart {chart} touches the chart boundary")]
    SupportViolation { chart: usize },
    #[error("chart {0} is not in the partition's atlas")]
    UnknownChart(usize),
    #[error("mismatch: {0}")]
    Mismatch(String),
}
