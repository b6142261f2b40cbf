//! Mollification commutators in unit-volume chart coordinates.
//!
//! With `(·)_ε` the chart-local convolution and `∂` the geometry stencil:
//!
//! ```text
//! r_ε[g, V]  = ∂_l (g V^l)_ε − ∂_l (g_ε V^l)
//! 𝒞_ε[g, V]  = ½ ∂_{ml}(g V^m V^l)_ε − V^m ∂_{ml}(g V^l)_ε + ½ V^m V^l ∂_{ml} g_ε
//! 𝒞_ε[g, V] → ½ ((∂_m V^m)² + ∂_l V^m ∂_m V^l) g        as ε → 0
//! ```
//!
//! The first-order families are all `r_ε[g, V]` for particular `(g, V)`:
//! `r = r[ρ_κ, a]`, `r̃ = r[ρ_κ, ∇_a a]`, `r̄ = r[ρ_κ, Γ^l_{mj} â^{mj}]`,
//! `r* = r[ρ a(𝒰_κ), a]`, `r_u = r[ρ_κ, u]`.
//!
//! For `ρ_κ = 𝒰_κ ρ` the chart contribution
//!
//! ```text
//! R_κ = Div²(ρ_κ â)_ε − Div²((ρ_κ)_ε â) + Div (ρ_κ Γ â)_ε − Div (Γ (ρ_κ â)_ε)
//! ```
//!
//! equals `2 G + 2 a(r) + r̄` with `G = 𝒞_ε[ρ_κ, a] − ½ (ρ_κ)_ε ((div a)² + ∂_l a^m ∂_m a^l)`.
//! Both sides are assembled independently, so the discrete defect only reflects the
//! product-rule error of the stencil.

pub mod fixtures;
pub mod rate;

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::geometry::fields::sym;
use crate::geometry::ops::hat;
use crate::geometry::{ChartGeometry, GeometryError, ScalarField, SupportBox, SymTensor2Field, VectorField};
use crate::regularization::mollifier::check_fits;
use crate::regularization::{convolve, Kernel, Mollifier, RegularizationError};

pub use fixtures::CommutatorFixture;
pub use rate::{fit_slope, run_study, RateRow, RateTable};

#[derive(Debug, Error)]
pub enum CommutatorError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Regularization(#[from] RegularizationError),
    #[error("chart {chart} is not unit-volume; commutators are formed in unit-volume coordinates")]
    NotUnitVolume { chart: usize },
    #[error("a rate needs at least 3 epsilon values, got {0}")]
    InsufficientPoints(usize),
    #[error("unknown commutator kind '{0}'")]
    UnknownKind(String),
    #[error("fixture: {0}")]
    Fixture(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CommutatorKind {
    /// `r[ρ_κ, a]`
    Transport,
    /// `r[ρ_κ, ∇_a a]`
    Covariant,
    /// `r[ρ_κ, Γ â]`
    Christoffel,
    /// `r[ρ a(𝒰_κ), a]`
    Partition,
    /// `r[ρ_κ, u]`
    Velocity,
    /// limit residual of `𝒞_ε[ρ_κ, a]`
    SecondOrder,
    /// defect of the `R_κ` decomposition
    Decomposition,
}

impl CommutatorKind {
    pub const ALL: [CommutatorKind; 7] = [
        Self::Transport,
        Self::Covariant,
        Self::Christoffel,
        Self::Partition,
        Self::Velocity,
        Self::SecondOrder,
        Self::Decomposition,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::Transport => "r",
            Self::Covariant => "rt",
            Self::Christoffel => "rb",
            Self::Partition => "rstar",
            Self::Velocity => "ru",
            Self::SecondOrder => "c2",
            Self::Decomposition => "R",
        }
    }
}

impl fmt::Display for CommutatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for CommutatorKind {
    type Err = CommutatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.label() == s)
            .ok_or_else(|| CommutatorError::UnknownKind(s.to_string()))
    }
}

/// Convolution with a fixed mollifier on one chart grid, refusing supports that would
/// leave the chart.
pub struct Smoother<'a> {
    geom: &'a ChartGeometry,
    eps: f64,
    kernel: Kernel,
}

impl<'a> Smoother<'a> {
    pub fn new(geom: &'a ChartGeometry, moll: &Mollifier) -> Result<Self, CommutatorError> {
        if !geom.unit_volume {
            return Err(CommutatorError::NotUnitVolume { chart: geom.chart.id });
        }
        Ok(Self { geom, eps: moll.eps, kernel: moll.kernel(geom.grid()) })
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>, CommutatorError> {
        let grid = self.geom.grid();
        check_fits(grid, &SupportBox::of(grid, f), self.eps)?;
        Ok(convolve(grid, &self.kernel, f))
    }
}

fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x * y).collect()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn check_scalar(geom: &ChartGeometry, g: &ScalarField) -> Result<(), CommutatorError> {
    if g.chart != geom.chart.id || g.len() != geom.len() {
        return Err(GeometryError::AtlasMismatch { what: "commutator density".into() }.into());
    }
    Ok(())
}

/// `r_ε[g, V]` from the smoothed pieces `g_ε` and `(g V^l)_ε`.
fn dl_from(geom: &ChartGeometry, gs: &[f64], gv: Vec<Vec<f64>>, v: &VectorField) -> Result<ScalarField, CommutatorError> {
    let lhs = geom.div_vector(&VectorField::new(geom.chart.id, gv))?;
    let rhs = geom.div_vector(&v.scaled(gs))?;
    Ok(geom.scalar(sub(&lhs.values, &rhs.values)))
}

fn smooth_products(s: &Smoother<'_>, g: &[f64], v: &VectorField) -> Result<Vec<Vec<f64>>, CommutatorError> {
    v.comps.iter().map(|c| s.apply(&mul(g, c))).collect()
}

fn dl_with(s: &Smoother<'_>, g: &ScalarField, v: &VectorField) -> Result<ScalarField, CommutatorError> {
    check_scalar(s.geom, g)?;
    let gs = s.apply(&g.values)?;
    dl_from(s.geom, &gs, smooth_products(s, &g.values, v)?, v)
}

/// `r_ε[g, V] = ∂_l (g V^l)_ε − ∂_l (g_ε V^l)`.
pub fn dl_commutator(
    geom: &ChartGeometry,
    g: &ScalarField,
    v: &VectorField,
    moll: &Mollifier,
) -> Result<ScalarField, CommutatorError> {
    dl_with(&Smoother::new(geom, moll)?, g, v)
}

/// `Γ^l_{mj} S^{mj}`.
pub fn christoffel_contract(geom: &ChartGeometry, s: &SymTensor2Field) -> VectorField {
    let d = geom.dim();
    let comps = (0..d)
        .map(|l| {
            (0..geom.len())
                .map(|n| {
                    let mut acc = 0.0;
                    for m in 0..d {
                        for j in 0..d {
                            acc += geom.gamma.get(l, m, j)[n] * s.get(m, j)[n];
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    VectorField::new(geom.chart.id, comps)
}

/// `r̄_ε = ∂_l (ρ_κ Γ^l_{mj} â^{mj})_ε − ∂_l ((ρ_κ)_ε Γ^l_{mj} â^{mj})`.
pub fn christoffel_commutator(
    geom: &ChartGeometry,
    rho_k: &ScalarField,
    a: &VectorField,
    moll: &Mollifier,
) -> Result<ScalarField, CommutatorError> {
    dl_commutator(geom, rho_k, &christoffel_contract(geom, &hat(a)), moll)
}

#[derive(Clone, Debug)]
pub struct SecondOrder {
    pub value: ScalarField,
    /// `½ ((div V)² + ∂_l V^m ∂_m V^l) g_ε`
    pub limit: ScalarField,
    pub limit_residual: ScalarField,
}

/// `𝒞_ε[g, V]` from `g_ε`, `(g V^l)_ε` and `(g V^m V^l)_ε` (stored per unordered pair).
fn second_order_from(
    geom: &ChartGeometry,
    gs: &[f64],
    gv: &[Vec<f64>],
    gvv: &[Vec<f64>],
    v: &VectorField,
) -> SecondOrder {
    let grid = geom.grid();
    let d = geom.dim();
    let n = geom.len();
    let mut value = vec![0.0; n];
    for m in 0..d {
        for l in 0..d {
            let t1 = grid.diff2(&gvv[sym(d, m, l)], m, l);
            let t2 = grid.diff2(&gv[l], m, l);
            let t3 = grid.diff2(gs, m, l);
            let (vm, vl) = (&v.comps[m], &v.comps[l]);
            for i in 0..n {
                value[i] += 0.5 * t1[i] - vm[i] * t2[i] + 0.5 * vm[i] * vl[i] * t3[i];
            }
        }
    }
    let grad: Vec<Vec<Vec<f64>>> =
        v.comps.iter().map(|c| (0..d).map(|k| grid.diff(c, k)).collect()).collect();
    let limit: Vec<f64> = (0..n)
        .map(|i| {
            let div: f64 = (0..d).map(|m| grad[m][m][i]).sum();
            let mut cross = 0.0;
            for m in 0..d {
                for l in 0..d {
                    cross += grad[m][l][i] * grad[l][m][i];
                }
            }
            0.5 * (div * div + cross) * gs[i]
        })
        .collect();
    SecondOrder {
        limit_residual: geom.scalar(sub(&value, &limit)),
        value: geom.scalar(value),
        limit: geom.scalar(limit),
    }
}

fn second_order_with(s: &Smoother<'_>, g: &ScalarField, v: &VectorField) -> Result<SecondOrder, CommutatorError> {
    check_scalar(s.geom, g)?;
    let gs = s.apply(&g.values)?;
    let gv = smooth_products(s, &g.values, v)?;
    let gvv: Vec<Vec<f64>> = hat(v).scaled(&g.values).comps.iter().map(|c| s.apply(c)).collect::<Result<_, _>>()?;
    Ok(second_order_from(s.geom, &gs, &gv, &gvv, v))
}

/// `𝒞_ε[g, V]` together with its limit and the limit residual.
pub fn second_order_commutator(
    geom: &ChartGeometry,
    g: &ScalarField,
    v: &VectorField,
    moll: &Mollifier,
) -> Result<SecondOrder, CommutatorError> {
    second_order_with(&Smoother::new(geom, moll)?, g, v)
}

#[derive(Clone, Debug)]
pub struct RDecomposition {
    pub lhs: ScalarField,
    pub rhs: ScalarField,
    /// `a(r_ε)`, recorded only.
    pub a_of_r: ScalarField,
    pub r_bar: ScalarField,
    pub g: ScalarField,
    /// `‖lhs − rhs‖_{L²}`
    pub defect: f64,
}

/// Both sides of `R_κ = 2G + 2a(r) + r̄` for `ρ_κ` on one unit-volume chart.
pub fn r_decomposition(
    geom: &ChartGeometry,
    rho_k: &ScalarField,
    a: &VectorField,
    moll: &Mollifier,
) -> Result<RDecomposition, CommutatorError> {
    let s = Smoother::new(geom, moll)?;
    check_scalar(geom, rho_k)?;
    let id = geom.chart.id;
    let a_hat = hat(a);
    let smooth_hat = SymTensor2Field {
        chart: id,
        dim: a_hat.dim,
        comps: a_hat.scaled(&rho_k.values).comps.iter().map(|c| s.apply(c)).collect::<Result<_, _>>()?,
    };
    let rho_s = s.apply(&rho_k.values)?;
    let rho_a_s = smooth_products(&s, &rho_k.values, a)?;
    let gamma_hat = christoffel_contract(geom, &a_hat);
    let rho_gamma_s = smooth_products(&s, &rho_k.values, &gamma_hat)?;

    let lhs: Vec<f64> = {
        let t1 = geom.div2(&smooth_hat)?;
        let t2 = geom.div2(&a_hat.scaled(&rho_s))?;
        let t3 = geom.div_vector(&VectorField::new(id, rho_gamma_s.clone()))?;
        let t4 = geom.div_vector(&christoffel_contract(geom, &smooth_hat))?;
        (0..geom.len()).map(|i| t1.values[i] - t2.values[i] + t3.values[i] - t4.values[i]).collect()
    };

    let g = second_order_from(geom, &rho_s, &rho_a_s, &smooth_hat.comps, a).limit_residual;
    let r = dl_from(geom, &rho_s, rho_a_s, a)?;
    let a_of_r = geom.apply(a, &r)?;
    let r_bar = dl_from(geom, &rho_s, rho_gamma_s, &gamma_hat)?;
    let rhs: Vec<f64> = (0..geom.len())
        .map(|i| 2.0 * g.values[i] + 2.0 * a_of_r.values[i] + r_bar.values[i])
        .collect();
    let defect = geom.norm(&sub(&lhs, &rhs));
    Ok(RDecomposition { lhs: geom.scalar(lhs), rhs: geom.scalar(rhs), a_of_r, r_bar, g, defect })
}

/// The scalar field whose norm a rate study tracks for `kind`.
pub fn residual(
    kind: CommutatorKind,
    fx: &CommutatorFixture,
    moll: &Mollifier,
) -> Result<ScalarField, CommutatorError> {
    let geom = &fx.geom;
    let rho_k = fx.rho_k();
    match kind {
        CommutatorKind::Transport => dl_commutator(geom, &rho_k, &fx.a, moll),
        CommutatorKind::Covariant => dl_commutator(geom, &rho_k, &geom.self_covariant(&fx.a)?, moll),
        CommutatorKind::Christoffel => christoffel_commutator(geom, &rho_k, &fx.a, moll),
        CommutatorKind::Partition => {
            let g = geom.apply(&fx.a, &fx.weight)?.zip_with(&fx.rho, |x, r| x * r);
            dl_commutator(geom, &g, &fx.a, moll)
        }
        CommutatorKind::Velocity => dl_commutator(geom, &rho_k, &fx.u, moll),
        CommutatorKind::SecondOrder => Ok(second_order_commutator(geom, &rho_k, &fx.a, moll)?.limit_residual),
        CommutatorKind::Decomposition => {
            let dec = r_decomposition(geom, &rho_k, &fx.a, moll)?;
            Ok(geom.scalar(sub(&dec.lhs.values, &dec.rhs.values)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fixtures as manifolds;

    fn torus(n: usize) -> ChartGeometry {
        ChartGeometry::new(&manifolds::flat_torus(1, n).unwrap().charts[0]).unwrap()
    }

    #[test]
    fn kind_labels_round_trip() {
        for k in CommutatorKind::ALL {
            assert_eq!(k.label().parse::<CommutatorKind>().unwrap(), k);
        }
        assert!("x".parse::<CommutatorKind>().is_err());
    }

    #[test]
    fn constant_velocity_commutes() {
        let geom = torus(256);
        let g = geom.scalar_fn(|p| (2.0 * std::f64::consts::PI * p[0]).sin().exp());
        let v = geom.vector_fn(|_| [1.7, 0.0]);
        let moll = Mollifier::new(1, 0.05).unwrap();
        let r = dl_commutator(&geom, &g, &v, &moll).unwrap();
        assert!(r.values.iter().all(|x| x.abs() < 1e-10));
        let c = second_order_commutator(&geom, &g, &v, &moll).unwrap();
        assert!(c.value.values.iter().all(|x| x.abs() < 1e-8));
    }

    #[test]
    fn unit_density_residual_is_smoothing_error_of_velocity() {
        // g ≡ 1: r = ∂(V_ε − V)
        let geom = torus(1024);
        let tau = 2.0 * std::f64::consts::PI;
        let g = geom.scalar_fn(|_| 1.0);
        let v = geom.vector_fn(|p| [(tau * p[0]).sin(), 0.0]);
        let moll = Mollifier::new(1, 0.04).unwrap();
        let r = dl_commutator(&geom, &g, &v, &moll).unwrap();
        let vs = convolve(geom.grid(), &moll.kernel(geom.grid()), &v.comps[0]);
        let expect = geom.grid().diff(&sub(&vs, &v.comps[0]), 0);
        for (x, y) in r.values.iter().zip(&expect) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn calibration_of_second_order_limit() {
        // V = z∂_z, g ≡ 1 away from a cutoff: 𝒞_ε = ½∫φ_ε''(s) s² ds = 1
        let atlas = manifolds::interval(0.0, 1.0, 4097).unwrap();
        let geom = ChartGeometry::new(&atlas.charts[0]).unwrap();
        let g = geom.scalar_fn(|p| crate::regularization::partition::smooth_step((p[0] - 0.1) / 0.2)
            * crate::regularization::partition::smooth_step((0.9 - p[0]) / 0.2));
        let v = geom.vector_fn(|p| [p[0], 0.0]);
        let moll = Mollifier::new(1, 0.01).unwrap();
        let c = second_order_commutator(&geom, &g, &v, &moll).unwrap();
        let mid = geom.grid().flat([2048, 0]);
        assert!((c.value.values[mid] - 1.0).abs() <= 0.02, "{}", c.value.values[mid]);
        assert!((c.limit.values[mid] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn flat_decomposition_holds() {
        let geom = torus(1024);
        let tau = 2.0 * std::f64::consts::PI;
        let rho = geom.scalar_fn(|p| (tau * p[0]).cos().exp());
        let a = geom.vector_fn(|p| [(tau * p[0]).sin(), 0.0]);
        for eps in [0.16, 0.04, 0.01] {
            let moll = Mollifier::new(1, eps).unwrap();
            let dec = r_decomposition(&geom, &rho, &a, &moll).unwrap();
            assert!(dec.defect < 1e-6, "eps {eps}: {}", dec.defect);
            assert!(dec.r_bar.values.iter().all(|x| *x == 0.0));
        }
    }

    #[test]
    fn non_unit_volume_chart_rejected() {
        let atlas = manifolds::exp_warped_1d(64).unwrap();
        let geom = ChartGeometry::new(&atlas.charts[0]).unwrap();
        let g = geom.scalar_fn(|_| 0.0);
        let v = geom.vector_fn(|_| [1.0, 0.0]);
        let moll = Mollifier::new(1, 0.01).unwrap();
        assert!(matches!(dl_commutator(&geom, &g, &v, &moll), Err(CommutatorError::NotUnitVolume { .. })));
    }
}
