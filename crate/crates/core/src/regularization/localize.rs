//! Localization to charts, chart-local smoothing and the pullback-extension back to the
//! atlas.
//!
//! A global object is represented by its samples on every chart grid. Localizing to
//! chart `κ` multiplies by `𝒰_κ`; smoothing convolves each component with `φ_ε` on the
//! chart grid; pulling back evaluates the result on another chart's grid through the
//! transition map, transforming vector and tensor components with its Jacobian, and
//! extends by zero outside the chart.

use super::mollifier::{convolve, Mollifier};
use super::partition::PartitionOfUnity;
use super::RegularizationError;
use crate::geometry::fields::{pair_count, sym};
use crate::geometry::{ChartGeometry, ScalarField, SupportBox, SymTensor2Field, VectorField};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rank {
    Scalar,
    Vector,
    Sym2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LocalizedField {
    pub chart: usize,
    pub rank: Rank,
    pub comps: Vec<Vec<f64>>,
    pub support: SupportBox,
}

impl LocalizedField {
    pub fn new(chart: usize, rank: Rank, comps: Vec<Vec<f64>>, pou: &PartitionOfUnity) -> Result<Self, RegularizationError> {
        let k = pou.index(chart)?;
        let grid = &pou.charts[k].grid;
        let support = comps
            .iter()
            .map(|c| SupportBox::of(grid, c))
            .fold(SupportBox { empty: true, lo: [0; 2], hi: [0; 2] }, |a, b| a.union(&b));
        Ok(Self { chart, rank, comps, support })
    }

    pub fn scalar(&self) -> ScalarField {
        ScalarField::new(self.chart, self.comps[0].clone())
    }

    pub fn vector(&self) -> VectorField {
        VectorField::new(self.chart, self.comps.clone())
    }

    pub fn tensor(&self) -> SymTensor2Field {
        SymTensor2Field { chart: self.chart, dim: dim_of(self.rank, self.comps.len()), comps: self.comps.clone() }
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|v| v.is_finite())
    }
}

fn dim_of(rank: Rank, comps: usize) -> usize {
    match rank {
        Rank::Scalar => 1,
        Rank::Vector => comps,
        Rank::Sym2 => {
            if comps == 1 {
                1
            } else {
                2
            }
        }
    }
}

fn multiply(comps: &[Vec<f64>], w: &[f64]) -> Vec<Vec<f64>> {
    comps.iter().map(|c| c.iter().zip(w).map(|(a, b)| a * b).collect()).collect()
}

fn localize_comps(
    chart: usize,
    rank: Rank,
    comps: &[Vec<f64>],
    pou: &PartitionOfUnity,
) -> Result<LocalizedField, RegularizationError> {
    let k = pou.index(chart)?;
    if comps.iter().any(|c| c.len() != pou.charts[k].grid.len()) {
        return Err(RegularizationError::Mismatch(format!("field length on chart {chart}")));
    }
    LocalizedField::new(chart, rank, multiply(comps, &pou.weights[k].values), pou)
}

/// `𝒰_κ f` for a scalar sampled on chart `κ`.
pub fn localize_scalar(f: &ScalarField, pou: &PartitionOfUnity) -> Result<LocalizedField, RegularizationError> {
    localize_comps(f.chart, Rank::Scalar, std::slice::from_ref(&f.values), pou)
}

pub fn localize_vector(x: &VectorField, pou: &PartitionOfUnity) -> Result<LocalizedField, RegularizationError> {
    localize_comps(x.chart, Rank::Vector, &x.comps, pou)
}

pub fn localize_tensor(s: &SymTensor2Field, pou: &PartitionOfUnity) -> Result<LocalizedField, RegularizationError> {
    localize_comps(s.chart, Rank::Sym2, &s.comps, pou)
}

/// Componentwise `φ_ε *` on the chart grid; requires `ε < ε_κ`.
pub fn smooth_local(
    lf: &LocalizedField,
    moll: &Mollifier,
    pou: &PartitionOfUnity,
) -> Result<LocalizedField, RegularizationError> {
    let k = pou.index(lf.chart)?;
    let limit = pou.eps_kappa[k];
    if moll.eps >= limit {
        return Err(RegularizationError::EpsilonTooLarge { eps: moll.eps, limit });
    }
    let grid = &pou.charts[k].grid;
    super::mollifier::check_fits(grid, &lf.support, moll.eps)?;
    let kernel = moll.kernel(grid);
    let comps = lf.comps.iter().map(|c| convolve(grid, &kernel, c)).collect();
    LocalizedField::new(lf.chart, lf.rank, comps, pou)
}

/// Samples of `ℒ_κ σ` on chart `target`.
pub fn pullback_extend(
    sigma: &LocalizedField,
    pou: &PartitionOfUnity,
    target: usize,
) -> Result<Vec<Vec<f64>>, RegularizationError> {
    let ks = pou.index(sigma.chart)?;
    let kt = pou.index(target)?;
    let src = &pou.charts[ks];
    if !sigma.support.empty && sigma.support.margin(&src.grid) <= 0.0 {
        return Err(RegularizationError::SupportViolation { chart: sigma.chart });
    }
    if ks == kt {
        return Ok(sigma.comps.clone());
    }
    let dst = &pou.charts[kt];
    let d = dst.dim();
    let mut out = vec![vec![0.0; dst.grid.len()]; sigma.comps.len()];
    if sigma.support.empty {
        return Ok(out);
    }
    for n in 0..dst.grid.len() {
        let q = dst.grid.point(n);
        let Some(p) = dst.transition(src, q) else { continue };
        let vals: Vec<f64> = sigma
            .comps
            .iter()
            .map(|c| src.grid.interpolate(c, p).unwrap_or(0.0))
            .collect();
        if vals.iter().all(|v| *v == 0.0) {
            continue;
        }
        match sigma.rank {
            Rank::Scalar => out[0][n] = vals[0],
            Rank::Vector | Rank::Sym2 => {
                let j = src
                    .transition_jacobian(dst, p)
                    .ok_or(RegularizationError::SupportViolation { chart: sigma.chart })?;
                if sigma.rank == Rank::Vector {
                    for a in 0..d {
                        out[a][n] = (0..d).map(|b| j[a][b] * vals[b]).sum();
                    }
                } else {
                    for a in 0..d {
                        for b in a..d {
                            let mut acc = 0.0;
                            for c in 0..d {
                                for e in 0..d {
                                    acc += j[a][c] * vals[sym(d, c, e)] * j[b][e];
                                }
                            }
                            out[sym(d, a, b)][n] = acc;
                        }
                    }
                    debug_assert_eq!(out.len(), pair_count(d));
                }
            }
        }
    }
    Ok(out)
}

/// `Σ_κ ℒ_κ σ_κ` sampled on every chart.
pub fn sum_extended(
    parts: &[LocalizedField],
    pou: &PartitionOfUnity,
) -> Result<Vec<Vec<Vec<f64>>>, RegularizationError> {
    pou.charts
        .iter()
        .map(|target| {
            let mut acc: Option<Vec<Vec<f64>>> = None;
            for part in parts {
                let ext = pullback_extend(part, pou, target.id)?;
                acc = Some(match acc {
                    None => ext,
                    Some(mut a) => {
                        for (x, y) in a.iter_mut().zip(ext) {
                            for (p, q) in x.iter_mut().zip(y) {
                                *p += q;
                            }
                        }
                        a
                    }
                });
            }
            Ok(acc.unwrap_or_default())
        })
        .collect()
}

/// `ρ_ε = Σ_κ ℒ_κ (𝒰_κ ρ)_ε` sampled on every chart; requires `ε < ε₀`.
pub fn reconstruct_global(
    rho: &[ScalarField],
    pou: &PartitionOfUnity,
    moll: &Mollifier,
) -> Result<Vec<ScalarField>, RegularizationError> {
    if moll.eps >= pou.eps0 {
        return Err(RegularizationError::EpsilonTooLarge { eps: moll.eps, limit: pou.eps0 });
    }
    if rho.len() != pou.charts.len() {
        return Err(RegularizationError::Mismatch("one sample set per chart".into()));
    }
    let parts = rho
        .iter()
        .map(|f| smooth_local(&localize_scalar(f, pou)?, moll, pou))
        .collect::<Result<Vec<_>, _>>()?;
    let sums = sum_extended(&parts, pou)?;
    Ok(sums
        .into_iter()
        .zip(&pou.charts)
        .map(|(mut c, chart)| ScalarField::new(chart.id, c.swap_remove(0)))
        .collect())
}

/// The partition-of-unity terms of one chart for one noise field.
#[derive(Clone, Debug)]
pub struct AuxTerms {
    /// `ρ a(𝒰_κ)`
    pub a1: LocalizedField,
    /// `ρ (∇²𝒰_κ)(a, a)`
    pub a2: LocalizedField,
    /// `ρ (∇_a a)(𝒰_κ)`
    pub a3: LocalizedField,
    /// `ρ a(𝒰_κ) a`
    pub a4: LocalizedField,
    /// `ρ u(𝒰_κ)`
    pub au: LocalizedField,
    /// `ρ_κ Γ^l_{mj} â^{mj}`
    pub v: LocalizedField,
}

/// Inputs sampled on chart `geom.chart`; `rho` is the unlocalized density.
pub fn localized_aux_terms(
    rho: &ScalarField,
    a: &VectorField,
    u: &VectorField,
    pou: &PartitionOfUnity,
    geom: &ChartGeometry,
) -> Result<AuxTerms, RegularizationError> {
    let id = geom.chart.id;
    let k = pou.index(id)?;
    let w = &pou.weights[k];
    let d = geom.dim();
    let au_w = geom.apply(a, w)?;
    let (_, hess, nabla) = geom.second_order_action(a, w)?;
    let uu_w = geom.apply(u, w)?;
    let times_rho = |f: &ScalarField| f.zip_with(rho, |x, r| x * r).values;
    let a1 = times_rho(&au_w);
    let a4: Vec<Vec<f64>> = a.comps.iter().map(|c| c.iter().zip(&a1).map(|(x, y)| x * y).collect()).collect();
    let rho_k: Vec<f64> = rho.values.iter().zip(&w.values).map(|(r, w)| r * w).collect();
    let hat = crate::geometry::ops::hat(a);
    let v: Vec<Vec<f64>> = (0..d)
        .map(|l| {
            (0..geom.len())
                .map(|n| {
                    let mut acc = 0.0;
                    for m in 0..d {
                        for j in 0..d {
                            acc += geom.gamma.get(l, m, j)[n] * hat.get(m, j)[n];
                        }
                    }
                    rho_k[n] * acc
                })
                .collect()
        })
        .collect();
    let mk = |rank, comps| LocalizedField::new(id, rank, comps, pou);
    Ok(AuxTerms {
        a1: mk(Rank::Scalar, vec![a1])?,
        a2: mk(Rank::Scalar, vec![times_rho(&hess)])?,
        a3: mk(Rank::Scalar, vec![times_rho(&nabla)])?,
        a4: mk(Rank::Vector, a4)?,
        au: mk(Rank::Scalar, vec![times_rho(&uu_w)])?,
        v: mk(Rank::Vector, v)?,
    })
}

/// `V̄_{κ,ε} = Γ^l_{mj} (ρ_κ â^{mj})_ε`.
pub fn smoothed_christoffel_term(
    rho: &ScalarField,
    a: &VectorField,
    pou: &PartitionOfUnity,
    geom: &ChartGeometry,
    moll: &Mollifier,
) -> Result<LocalizedField, RegularizationError> {
    let local = localize_tensor(&crate::geometry::ops::hat(a).scaled(&rho.values), pou)?;
    let smooth = smooth_local(&local, moll, pou)?;
    let d = geom.dim();
    let comps = (0..d)
        .map(|l| {
            (0..geom.len())
                .map(|n| {
                    let mut acc = 0.0;
                    for m in 0..d {
                        for j in 0..d {
                            acc += geom.gamma.get(l, m, j)[n] * smooth.comps[sym(d, m, j)][n];
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    LocalizedField::new(geom.chart.id, Rank::Vector, comps, pou)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fixtures;
    use crate::regularization::make_partition;
    use std::f64::consts::PI;

    #[test]
    fn torus_localization_is_identity() {
        let atlas = fixtures::flat_torus(1, 32).unwrap();
        let pou = make_partition(&atlas, 0.1).unwrap();
        let f = ScalarField::constant(0, 32, 1.0);
        let lf = localize_scalar(&f, &pou).unwrap();
        assert_eq!(lf.comps[0], f.values);
        assert_eq!(pullback_extend(&lf, &pou, 0).unwrap()[0], f.values);
    }

    #[test]
    fn sphere_localizations_reassemble() {
        let atlas = fixtures::sphere(128).unwrap();
        let pou = make_partition(&atlas, 0.2).unwrap();
        let g = |m: [f64; 3]| 1.0 + m[0] * m[2] + 0.5 * m[1];
        let rho: Vec<ScalarField> = atlas
            .charts
            .iter()
            .map(|c| ScalarField::new(c.id, (0..c.grid.len()).map(|i| g(c.to_model(c.grid.point(i)))).collect()))
            .collect();
        let parts: Vec<_> = rho.iter().map(|f| localize_scalar(f, &pou).unwrap()).collect();
        let sums = sum_extended(&parts, &pou).unwrap();
        for (k, s) in sums.iter().enumerate() {
            let err = s[0].iter().zip(&rho[k].values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            // limited by the four-point transfer interpolation, O(h⁴)
            assert!(err < 1e-3, "chart {k}: {err}");
        }
    }

    #[test]
    fn torus_reconstruction_is_direct_convolution() {
        let atlas = fixtures::flat_torus(1, 256).unwrap();
        let pou = make_partition(&atlas, 0.1).unwrap();
        let rho = ScalarField::from_fn(0, &atlas.charts[0].grid, |p| (2.0 * PI * p[0]).sin());
        let moll = Mollifier::new(1, 0.05).unwrap();
        let out = reconstruct_global(std::slice::from_ref(&rho), &pou, &moll).unwrap();
        let direct = convolve(&atlas.charts[0].grid, &moll.kernel(&atlas.charts[0].grid), &rho.values);
        assert_eq!(out[0].values, direct);
    }

    #[test]
    fn support_touching_boundary_rejected() {
        let atlas = fixtures::interval(0.0, 1.0, 32).unwrap();
        let pou = make_partition(&atlas, 0.1).unwrap();
        let f = ScalarField::constant(0, 32, 1.0);
        let lf = localize_scalar(&f, &pou).unwrap();
        assert!(matches!(pullback_extend(&lf, &pou, 0), Err(RegularizationError::SupportViolation { .. })));
    }
}
