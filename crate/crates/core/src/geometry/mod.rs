//! Chart-local Riemannian geometry: metrics, Christoffel symbols, divergences, covariant
//! Hessians, the second-order operators `Λ`, and unit-volume atlases.

pub mod chart;
pub mod fields;
pub mod fixtures;
pub mod metric;
pub mod ops;
pub mod unit_volume;

use thiserror::Error;

use crate::grid::GridError;

pub use chart::{Atlas, Chart, ChartMap, ChartMetric, ModelPoint, ModelSpace};
pub use fields::{ChristoffelField, ScalarField, SupportBox, SymTensor2Field, VectorField};
pub use metric::{christoffel, MetricField, MetricPreset};
pub use ops::{ChartGeometry, LambdaMode};
pub use unit_volume::{build_unit_volume_atlas, PsiMap};

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("metric is not positive definite on chart {chart} at node {node}")]
    SingularMetric { chart: usize, node: usize },
    #[error("atlas mismatch: {what}")]
    AtlasMismatch { what: String },
    #[error("density is not positive on chart {chart} at u = ({u1}, {u2})")]
    NonPositiveDensity { chart: usize, u1: f64, u2: f64 },
    #[error("unit-volume image of chart {chart} is not a box (row lengths differ by {spread})")]
    NonBoxImage { chart: usize, spread: f64 },
    #[error("unit-volume chart {chart} has |det h - 1| = {defect}")]
    VolumeDefect { chart: usize, defect: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("fixture: {0}")]
    Fixture(String),
    #[error("reading {path}: {source}")]
    Io { path: String, source: std::io::Error },
}
