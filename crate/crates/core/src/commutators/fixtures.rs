//! Densities and vector fields on which commutators are studied.
//!
//! The curved fixture lives on a sub-box of the first unit-volume sphere chart,
//! `z¹ ∈ [c − ½, c + ½]` closed and `z²` the whole periodic circle. The density is a
//! band `b((z¹ − c)/R)(1 + ½ cos 2πz²)` that stays at least `½ − R` away from the
//! closed ends, and `𝒰_κ` is the partition weight of that chart pulled onto the sub-box.

use std::f64::consts::PI;

use super::CommutatorError;
use crate::geometry::{build_unit_volume_atlas, fixtures as manifolds, ChartGeometry, ScalarField, VectorField};
use crate::regularization::make_partition;

pub const PATCH_CENTER: f64 = 3.7;
pub const PATCH_HALF_WIDTH: f64 = 0.5;
pub const BAND_RADIUS: f64 = 0.32;
pub const SPHERE_MARGIN: f64 = 0.2;
const SPHERE_BASE_NODES: usize = 32;

pub const DEFAULT_1D_NODES: usize = 2048;
pub const DEFAULT_2D_NODES: usize = 256;
/// Curved patch resolution at which the decomposition defect of `R` stays below 1e-4 for ε ≥ 0.01.
pub const DEFAULT_SPHERE_NODES: usize = 320;

#[derive(Clone, Debug)]
pub struct CommutatorFixture {
    pub name: String,
    pub geom: ChartGeometry,
    /// Global density sampled on the chart.
    pub rho: ScalarField,
    /// `𝒰_κ` on the chart.
    pub weight: ScalarField,
    pub a: VectorField,
    pub u: VectorField,
    /// Admissible ε for this chart.
    pub eps_kappa: f64,
}

impl CommutatorFixture {
    /// `ρ_κ = 𝒰_κ ρ`.
    pub fn rho_k(&self) -> ScalarField {
        self.rho.zip_with(&self.weight, |r, w| r * w)
    }
}

pub fn bump(t: f64) -> f64 {
    if t.abs() < 1.0 {
        (-1.0 / (1.0 - t * t)).exp()
    } else {
        0.0
    }
}

fn flat(d: usize, n: usize) -> Result<ChartGeometry, CommutatorError> {
    Ok(ChartGeometry::new(&manifolds::flat_torus(d, n)?.charts[0])?)
}

fn assemble(
    name: &str,
    geom: ChartGeometry,
    rho: impl Fn([f64; 2]) -> f64,
    a: impl Fn([f64; 2]) -> [f64; 2],
    u: impl Fn([f64; 2]) -> [f64; 2],
    weight: ScalarField,
    eps_kappa: f64,
) -> CommutatorFixture {
    CommutatorFixture {
        name: name.to_string(),
        rho: geom.scalar_fn(rho),
        a: geom.vector_fn(a),
        u: geom.vector_fn(u),
        weight,
        eps_kappa,
        geom,
    }
}

/// Smooth periodic data on the flat circle.
pub fn torus_1d(n: usize) -> Result<CommutatorFixture, CommutatorError> {
    let geom = flat(1, n)?;
    let w = ScalarField::constant(geom.chart.id, geom.len(), 1.0);
    Ok(assemble(
        "flat-torus-1d",
        geom,
        |p| (2.0 * PI * p[0]).cos().exp(),
        |p| [(2.0 * PI * p[0]).sin() + 0.3, 0.0],
        |p| [0.5 * (2.0 * PI * p[0]).cos() + 0.2 * (4.0 * PI * p[0]).sin(), 0.0],
        w,
        f64::INFINITY,
    ))
}

/// `ρ = |z − ½|` on the flat circle, Lipschitz but not `C¹`.
pub fn kink_1d(n: usize) -> Result<CommutatorFixture, CommutatorError> {
    let geom = flat(1, n)?;
    let w = ScalarField::constant(geom.chart.id, geom.len(), 1.0);
    Ok(assemble(
        "kink-1d",
        geom,
        |p| (p[0] - 0.5).abs(),
        |p| [(2.0 * PI * p[0]).sin() + 0.3, 0.0],
        |p| [0.5 * (2.0 * PI * p[0]).cos(), 0.0],
        w,
        f64::INFINITY,
    ))
}

pub fn torus_2d(n: usize) -> Result<CommutatorFixture, CommutatorError> {
    let geom = flat(2, n)?;
    let w = ScalarField::constant(geom.chart.id, geom.len(), 1.0);
    Ok(assemble(
        "flat-torus-2d",
        geom,
        |p| ((2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).cos()).exp(),
        |p| [(2.0 * PI * p[1]).sin() + 0.4 * (2.0 * PI * p[0]).cos(), 0.6 * (2.0 * PI * p[0]).sin()],
        |p| [-(2.0 * PI * p[1]).sin(), (2.0 * PI * p[0]).sin()],
        w,
        f64::INFINITY,
    ))
}

/// Band density on a sub-box of the first unit-volume sphere chart; `n` nodes per axis.
pub fn sphere_patch(n: usize) -> Result<CommutatorFixture, CommutatorError> {
    let atlas = build_unit_volume_atlas(&manifolds::sphere(SPHERE_BASE_NODES)?)?;
    let pou = make_partition(&atlas, SPHERE_MARGIN)?;
    let chart = &atlas.charts[0];
    let z2 = chart.grid.axis(1);
    let patch = chart.restrict(
        [PATCH_CENTER - PATCH_HALF_WIDTH, z2.lo],
        [PATCH_CENTER + PATCH_HALF_WIDTH, z2.hi],
        [n, n],
    )?;
    let geom = ChartGeometry::new(&patch)?;
    let weight = ScalarField::new(
        patch.id,
        (0..patch.grid.len()).map(|i| pou.weight_at(0, patch.to_model(patch.grid.point(i)))).collect(),
    );
    Ok(assemble(
        "sphere",
        geom,
        |p| bump((p[0] - PATCH_CENTER) / BAND_RADIUS) * (1.0 + 0.5 * (2.0 * PI * p[1]).cos()),
        |p| [0.5 + 0.3 * (2.0 * PI * p[1]).sin(), 0.4 * (2.0 * PI * p[1]).cos() + 0.2 * (p[0] - PATCH_CENTER)],
        |p| [0.3 * (2.0 * PI * p[1]).cos(), 0.5 * (2.0 * PI * p[1]).sin() + 0.1],
        weight,
        pou.eps_kappa[0],
    ))
}

/// Fixture for a manifold name; `rough` selects the kink density on the circle.
pub fn by_name(manifold: &str, resolution: Option<usize>, rough: bool) -> Result<CommutatorFixture, CommutatorError> {
    match (manifold, rough) {
        ("flat-torus-1d", false) => torus_1d(resolution.unwrap_or(DEFAULT_1D_NODES)),
        ("flat-torus-1d", true) => kink_1d(resolution.unwrap_or(DEFAULT_1D_NODES)),
        ("flat-torus-2d", false) => torus_2d(resolution.unwrap_or(DEFAULT_2D_NODES)),
        ("sphere", false) => sphere_patch(resolution.unwrap_or(DEFAULT_SPHERE_NODES)),
        (m, true) => Err(CommutatorError::Fixture(format!("no rough density for '{m}'"))),
        (m, false) => Err(CommutatorError::Fixture(format!("no commutator fixture for '{m}'"))),
    }
}
