//! Chart-based numerics for stochastic continuity equations on Riemannian manifolds.

pub mod commutators;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod kv;
pub mod regularization;
pub mod renormalization;
pub mod spde;
