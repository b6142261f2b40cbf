//! Metric tensors on chart grids and their Christoffel symbols.

use serde::{Deserialize, Serialize};

use super::fields::{pair_count, sym, ChristoffelField};
use super::GeometryError;
use crate::grid::{Grid, Point, MAX_DIM};

/// Pointwise symmetric matrix stored as the upper triangle (`sym` slots).
pub type SymVals = [f64; 3];

/// Closed-form metrics available to fixtures, in the chart's native coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricPreset {
    Flat,
    /// Round unit sphere in colatitude/longitude, `diag(1, sin²θ)`.
    SpherePolar,
    /// One-dimensional `h₁₁ = e^{2z}`.
    ExpWarped1d,
}

impl MetricPreset {
    pub fn name(&self) -> &'static str {
        match self {
            MetricPreset::Flat => "flat",
            MetricPreset::SpherePolar => "sphere-polar",
            MetricPreset::ExpWarped1d => "exp-warped-1d",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "flat" => Some(MetricPreset::Flat),
            "sphere-polar" => Some(MetricPreset::SpherePolar),
            "exp-warped-1d" => Some(MetricPreset::ExpWarped1d),
            _ => None,
        }
    }

    pub fn eval(&self, d: usize, x: Point) -> SymVals {
        match self {
            MetricPreset::Flat => identity(d),
            MetricPreset::SpherePolar => {
                let s = x[0].sin();
                [1.0, 0.0, s * s]
            }
            MetricPreset::ExpWarped1d => [(2.0 * x[0]).exp(), 0.0, 0.0],
        }
    }
}

pub fn identity(d: usize) -> SymVals {
    if d == 1 {
        [1.0, 0.0, 0.0]
    } else {
        [1.0, 0.0, 1.0]
    }
}

pub fn sym_det(d: usize, h: &SymVals) -> f64 {
    if d == 1 {
        h[0]
    } else {
        h[0] * h[2] - h[1] * h[1]
    }
}

pub fn sym_inverse(d: usize, h: &SymVals) -> SymVals {
    if d == 1 {
        [1.0 / h[0], 0.0, 0.0]
    } else {
        let det = sym_det(d, h);
        [h[2] / det, -h[1] / det, h[0] / det]
    }
}

pub fn positive_definite(d: usize, h: &SymVals) -> bool {
    h[0] > 0.0 && sym_det(d, h) > 0.0 && h.iter().all(|v| v.is_finite())
}

/// Sixth-order central difference of a symmetric-matrix valued function along `axis`.
pub fn fd6(f: &impl Fn(Point) -> SymVals, x: Point, axis: usize, delta: f64) -> SymVals {
    const C: [(f64, f64); 3] = [(1.0, 45.0), (2.0, -9.0), (3.0, 1.0)];
    let mut out = [0.0; 3];
    for (step, c) in C {
        let mut xp = x;
        let mut xm = x;
        xp[axis] += step * delta;
        xm[axis] -= step * delta;
        let fp = f(xp);
        let fm = f(xm);
        for s in 0..3 {
            out[s] += c * (fp[s] - fm[s]);
        }
    }
    for v in &mut out {
        *v /= 60.0 * delta;
    }
    out
}

pub const FD6_STEP: f64 = 1e-3;

/// Metric components on a chart grid with cached inverse, determinant and first
/// derivatives `∂_k h_{ij}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricField {
    pub chart: usize,
    pub dim: usize,
    pub h: Vec<Vec<f64>>,
    pub inv: Vec<Vec<f64>>,
    pub det: Vec<f64>,
    /// `dh[k][sym(i,j)]` holds `∂_k h_{ij}`.
    pub dh: Vec<Vec<Vec<f64>>>,
}

impl MetricField {
    /// Build from pointwise values and derivatives.
    pub fn from_point_fn(
        chart: usize,
        grid: &Grid,
        f: impl Fn(Point) -> (SymVals, [SymVals; MAX_DIM]),
    ) -> Result<Self, GeometryError> {
        let d = grid.dim();
        let np = pair_count(d);
        let n = grid.len();
        let mut h = vec![vec![0.0; n]; np];
        let mut dh = vec![vec![vec![0.0; n]; np]; d];
        for i in 0..n {
            let (v, dv) = f(grid.point(i));
            for s in 0..np {
                h[s][i] = v[s];
                for k in 0..d {
                    dh[k][s][i] = dv[k][s];
                }
            }
        }
        Self::assemble(chart, d, h, dh)
    }

    /// Closed-form metric; derivatives from a sixth-order difference of the formula.
    pub fn from_closed_form(
        chart: usize,
        grid: &Grid,
        f: impl Fn(Point) -> SymVals,
    ) -> Result<Self, GeometryError> {
        let d = grid.dim();
        Self::from_point_fn(chart, grid, |x| {
            let mut dv = [[0.0; 3]; MAX_DIM];
            for (k, slot) in dv.iter_mut().enumerate().take(d) {
                *slot = fd6(&f, x, k, FD6_STEP);
            }
            (f(x), dv)
        })
    }

    /// Sampled metric; derivatives from the grid stencil.
    pub fn from_samples(chart: usize, grid: &Grid, h: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        let d = grid.dim();
        if h.len() != pair_count(d) || h.iter().any(|c| c.len() != grid.len()) {
            return Err(GeometryError::AtlasMismatch {
                what: "sampled metric shape".into(),
            });
        }
        let dh = (0..d).map(|k| h.iter().map(|c| grid.diff(c, k)).collect()).collect();
        Self::assemble(chart, d, h, dh)
    }

    fn assemble(
        chart: usize,
        d: usize,
        h: Vec<Vec<f64>>,
        dh: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self, GeometryError> {
        let n = h[0].len();
        let np = pair_count(d);
        let mut inv = vec![vec![0.0; n]; np];
        let mut det = vec![0.0; n];
        for i in 0..n {
            let mut v = [0.0; 3];
            for s in 0..np {
                v[s] = h[s][i];
            }
            if !positive_definite(d, &v) {
                return Err(GeometryError::SingularMetric { chart, node: i });
            }
            det[i] = sym_det(d, &v);
            let vi = sym_inverse(d, &v);
            for s in 0..np {
                inv[s][i] = vi[s];
            }
        }
        Ok(Self { chart, dim: d, h, inv, det, dh })
    }

    pub fn len(&self) -> usize {
        self.det.len()
    }

    pub fn is_empty(&self) -> bool {
        self.det.is_empty()
    }

    pub fn at(&self, i: usize) -> SymVals {
        let mut v = [0.0; 3];
        for (s, c) in self.h.iter().enumerate() {
            v[s] = c[i];
        }
        v
    }

    pub fn inv_at(&self, i: usize) -> SymVals {
        let mut v = [0.0; 3];
        for (s, c) in self.inv.iter().enumerate() {
            v[s] = c[i];
        }
        v
    }

    pub fn sqrt_det(&self) -> Vec<f64> {
        self.det.iter().map(|d| d.sqrt()).collect()
    }

    /// `max |h^{ij} h_{jk} - δ^i_k|` over nodes.
    pub fn inverse_defect(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for n in 0..self.len() {
            for i in 0..d {
                for k in 0..d {
                    let mut s = 0.0;
                    for j in 0..d {
                        s += self.inv[sym(d, i, j)][n] * self.h[sym(d, j, k)][n];
                    }
                    let target = if i == k { 1.0 } else { 0.0 };
                    worst = worst.max((s - target).abs());
                }
            }
        }
        worst
    }
}

/// `Γ^k_{ij} = ½ h^{kl}(∂_i h_{jl} + ∂_j h_{il} − ∂_l h_{ij})`.
pub fn christoffel(metric: &MetricField) -> Result<ChristoffelField, GeometryError> {
    let d = metric.dim;
    let np = pair_count(d);
    let n = metric.len();
    if let Some(i) = (0..n).find(|&i| !positive_definite(d, &metric.at(i))) {
        return Err(GeometryError::SingularMetric { chart: metric.chart, node: i });
    }
    let mut comps = vec![vec![0.0; n]; d * np];
    for k in 0..d {
        for i in 0..d {
            for j in i..d {
                let slot = &mut comps[k * np + sym(d, i, j)];
                for l in 0..d {
                    let hkl = &metric.inv[sym(d, k, l)];
                    let a = &metric.dh[i][sym(d, j, l)];
                    let b = &metric.dh[j][sym(d, i, l)];
                    let c = &metric.dh[l][sym(d, i, j)];
                    for p in 0..n {
                        slot[p] += 0.5 * hkl[p] * (a[p] + b[p] - c[p]);
                    }
                }
            }
        }
    }
    Ok(ChristoffelField { chart: metric.chart, dim: d, comps })
}
