//! Stochastic continuity equation in Itô form,
//!
//! ```text
//! dρ + Div(ρu) dt + Σ_i Div(ρ a_i) dW^i = ½ Σ_i Λ_i(ρ) dt,      Λ_i(ρ) = Div(Div(ρ a_i) a_i),
//! ```
//!
//! advanced by explicit Euler–Maruyama on one chart with conservative flux stencils, and
//! the weak formulations it is checked against.
//!
//! Sphere runs use the colatitude band chart. Every coefficient preset there vanishes
//! outside `θ ∈ [0.35, π − 0.35]`, so the caps never move and the band chart carries
//! the whole evolution.

pub mod coefficients;
pub mod config;
pub mod driver;
pub mod scheme;
pub mod weak;

use thiserror::Error;

use crate::geometry::GeometryError;

pub use coefficients::{CoefficientSet, Domain, MAX_NOISES};
pub use config::{coupled_increments, par_paths, SimConfig};
pub use driver::{BrownianDriver, Increments};
pub use scheme::{
    dt_max, PathSummary, Recorder, SolutionState, SpdeProblem, StepObserver, Trajectory, MASS_DRIFT_PER_STEP,
};
pub use weak::{
    strat_to_ito_correction, weak_form_residual, weak_terms, Form, Identity, Nonlinearity, TestFunction, WeakForm,
    WeakTerms,
};

#[derive(Debug, Error)]
pub enum SpdeError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("dt = {dt:e} exceeds the stability limit {dt_max:e}")]
    CflViolation { dt: f64, dt_max: f64 },
    #[error("path {path}: non-finite density after step {step}")]
    NonFiniteState { path: u64, step: usize },
    #[error("at most {max} noise fields, got {got}")]
    TooManyNoises { got: usize, max: usize },
    #[error("horizon {horizon} is not a positive whole number of steps of {dt}")]
    BadHorizon { dt: f64, horizon: f64 },
    #[error("no coefficient preset '{preset}' on {manifold}")]
    UnknownPreset { preset: String, manifold: String },
    #[error("no stochastic simulation on manifold '{0}'")]
    UnknownManifold(String),
    #[error("test function '{0}' is not one of: one, fourier:k")]
    BadTestFunction(String),
    #[error("mismatch: {0}")]
    Mismatch(String),
}
