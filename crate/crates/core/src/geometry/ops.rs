//! Differential operators on a single chart.
//!
//! With `∂` the grid stencil and `Γ` the Christoffel symbols of the chart metric:
//!
//! ```text
//! Div X        = ∂_j X^j + Γ^j_{kj} X^k
//! (Div S)^i    = ∂_j S^{ij} + Γ^i_{jk} S^{kj} + Γ^j_{jk} S^{ik}
//! Div² S       = Div(Div S)
//! (∇²ψ)_{ij}   = ∂_{ij}ψ − Γ^k_{ij} ∂_k ψ
//! (∇_X X)^k    = X^i ∂_i X^k + Γ^k_{ij} X^i X^j
//! Λ(ψ)         = Div(Div(ψa) a) = Div²(ψ â) − Div(ψ ∇_a a)
//! ```
//!
//! On a unit-volume chart the contracted symbol `Γ^j_{jk}` vanishes and its terms are
//! skipped.

use super::chart::Chart;
use super::fields::{pair_count, sym, ChristoffelField, ScalarField, SymTensor2Field, VectorField};
use super::metric::{christoffel, MetricField};
use super::GeometryError;
use crate::grid::{l2_norm, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LambdaMode {
    Direct,
    Alternative,
}

/// Cached metric data of one chart.
#[derive(Clone, Debug)]
pub struct ChartGeometry {
    pub chart: Chart,
    pub metric: MetricField,
    pub gamma: ChristoffelField,
    pub sqrt_det: Vec<f64>,
    /// Trapezoid weights times `|h|^{1/2}`.
    pub volume: Vec<f64>,
    pub unit_volume: bool,
}

impl ChartGeometry {
    pub fn new(chart: &Chart) -> Result<Self, GeometryError> {
        let metric = chart.metric_field()?;
        let gamma = christoffel(&metric)?;
        let sqrt_det = metric.sqrt_det();
        let volume = chart.grid.weights().iter().zip(&sqrt_det).map(|(w, s)| w * s).collect();
        Ok(Self {
            unit_volume: chart.is_unit_volume(),
            chart: chart.clone(),
            metric,
            gamma,
            sqrt_det,
            volume,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.chart.grid
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn len(&self) -> usize {
        self.chart.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, chart: usize, len: usize, what: &str) -> Result<(), GeometryError> {
        if chart != self.chart.id || len != self.len() {
            return Err(GeometryError::AtlasMismatch {
                what: format!(
                    "{what} lives on chart {chart} with {len} samples, geometry is chart {} with {}",
                    self.chart.id,
                    self.len()
                ),
            });
        }
        Ok(())
    }

    fn check_vector(&self, x: &VectorField) -> Result<(), GeometryError> {
        self.check(x.chart, x.len(), "vector field")?;
        if x.dim() != self.dim() {
            return Err(GeometryError::AtlasMismatch { what: "vector field dimension".into() });
        }
        Ok(())
    }

    fn check_tensor(&self, s: &SymTensor2Field) -> Result<(), GeometryError> {
        self.check(s.chart, s.len(), "tensor field")?;
        if s.dim != self.dim() {
            return Err(GeometryError::AtlasMismatch { what: "tensor field dimension".into() });
        }
        Ok(())
    }

    pub fn scalar(&self, values: Vec<f64>) -> ScalarField {
        ScalarField::new(self.chart.id, values)
    }

    pub fn scalar_fn(&self, f: impl Fn([f64; 2]) -> f64) -> ScalarField {
        ScalarField::from_fn(self.chart.id, self.grid(), f)
    }

    pub fn vector_fn(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> VectorField {
        VectorField::from_fn(self.chart.id, self.grid(), f)
    }

    /// `∫ f dV_h` over this chart.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.volume.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// `L²(dV_h)` norm over this chart.
    pub fn norm(&self, f: &[f64]) -> f64 {
        l2_norm(&self.volume, f)
    }

    pub fn div_vector(&self, x: &VectorField) -> Result<ScalarField, GeometryError> {
        self.check_vector(x)?;
        let d = self.dim();
        let mut out = vec![0.0; self.len()];
        for j in 0..d {
            let dj = self.grid().diff(&x.comps[j], j);
            for (o, v) in out.iter_mut().zip(dj) {
                *o += v;
            }
        }
        if !self.unit_volume {
            for k in 0..d {
                let tr = self.gamma.trace(k);
                for (n, o) in out.iter_mut().enumerate() {
                    *o += tr[n] * x.comps[k][n];
                }
            }
        }
        Ok(self.scalar(out))
    }

    /// `X(ψ) = X^i ∂_i ψ`.
    pub fn apply(&self, x: &VectorField, psi: &ScalarField) -> Result<ScalarField, GeometryError> {
        self.check_vector(x)?;
        self.check(psi.chart, psi.len(), "scalar field")?;
        Ok(self.scalar(x.apply(self.grid(), &psi.values)))
    }

    /// Covariant Hessian `(∇²ψ)_{ij}`, stored once per unordered pair.
    pub fn hessian(&self, psi: &ScalarField) -> Result<SymTensor2Field, GeometryError> {
        self.check(psi.chart, psi.len(), "scalar field")?;
        let d = self.dim();
        let grid = self.grid();
        let grad: Vec<Vec<f64>> = (0..d).map(|k| grid.diff(&psi.values, k)).collect();
        let mut out = SymTensor2Field::zeros(self.chart.id, d, self.len());
        for i in 0..d {
            for j in i..d {
                let mut hij = grid.diff(&grad[j], i);
                for (k, gk) in grad.iter().enumerate() {
                    let g = self.gamma.get(k, i, j);
                    for n in 0..hij.len() {
                        hij[n] -= g[n] * gk[n];
                    }
                }
                out.comps[sym(d, i, j)] = hij;
            }
        }
        Ok(out)
    }

    /// `(∇_X X)^k`.
    pub fn self_covariant(&self, x: &VectorField) -> Result<VectorField, GeometryError> {
        self.check_vector(x)?;
        let d = self.dim();
        let mut comps = Vec::with_capacity(d);
        for k in 0..d {
            let mut c = x.apply(self.grid(), &x.comps[k]);
            for i in 0..d {
                for j in 0..d {
                    let g = self.gamma.get(k, i, j);
                    for n in 0..c.len() {
                        c[n] += g[n] * x.comps[i][n] * x.comps[j][n];
                    }
                }
            }
            comps.push(c);
        }
        Ok(VectorField::new(self.chart.id, comps))
    }

    /// `(X(X(ψ)), (∇²ψ)(X,X), (∇_X X)(ψ))`.
    pub fn second_order_action(
        &self,
        x: &VectorField,
        psi: &ScalarField,
    ) -> Result<(ScalarField, ScalarField, ScalarField), GeometryError> {
        let xpsi = self.apply(x, psi)?;
        let xxpsi = self.apply(x, &xpsi)?;
        let hess = self.hessian(psi)?;
        let d = self.dim();
        let mut hxx = vec![0.0; self.len()];
        for i in 0..d {
            for j in 0..d {
                let h = hess.get(i, j);
                for n in 0..hxx.len() {
                    hxx[n] += h[n] * x.comps[i][n] * x.comps[j][n];
                }
            }
        }
        let nabla = self.apply(&self.self_covariant(x)?, psi)?;
        Ok((xxpsi, self.scalar(hxx), nabla))
    }

    /// `(Div S)^i = ∇_j S^{ij}`.
    pub fn div_tensor(&self, s: &SymTensor2Field) -> Result<VectorField, GeometryError> {
        self.check_tensor(s)?;
        let d = self.dim();
        let grid = self.grid();
        let trace: Vec<Vec<f64>> = if self.unit_volume { Vec::new() } else { (0..d).map(|k| self.gamma.trace(k)).collect() };
        let mut comps = Vec::with_capacity(d);
        for i in 0..d {
            let mut c = vec![0.0; self.len()];
            for j in 0..d {
                for (o, v) in c.iter_mut().zip(grid.diff(s.get(i, j), j)) {
                    *o += v;
                }
                for k in 0..d {
                    let g = self.gamma.get(i, j, k);
                    let skj = s.get(k, j);
                    for n in 0..c.len() {
                        c[n] += g[n] * skj[n];
                    }
                }
            }
            for (k, tr) in trace.iter().enumerate() {
                let sik = s.get(i, k);
                for n in 0..c.len() {
                    c[n] += tr[n] * sik[n];
                }
            }
            comps.push(c);
        }
        Ok(VectorField::new(self.chart.id, comps))
    }

    pub fn div2(&self, s: &SymTensor2Field) -> Result<ScalarField, GeometryError> {
        self.div_vector(&self.div_tensor(s)?)
    }

    pub fn lambda(
        &self,
        psi: &ScalarField,
        a: &VectorField,
        mode: LambdaMode,
    ) -> Result<ScalarField, GeometryError> {
        self.check(psi.chart, psi.len(), "scalar field")?;
        self.check_vector(a)?;
        match mode {
            LambdaMode::Direct => {
                let inner = self.div_vector(&a.scaled(&psi.values))?;
                self.div_vector(&a.scaled(&inner.values))
            }
            LambdaMode::Alternative => {
                let first = self.div2(&hat(a).scaled(&psi.values))?;
                let second = self.div_vector(&self.self_covariant(a)?.scaled(&psi.values))?;
                Ok(first.zip_with(&second, |p, q| p - q))
            }
        }
    }

    /// `S(df, ·)^i = S^{ij} ∂_j f`.
    pub fn contract_gradient(
        &self,
        s: &SymTensor2Field,
        f: &ScalarField,
    ) -> Result<VectorField, GeometryError> {
        self.check_tensor(s)?;
        self.check(f.chart, f.len(), "scalar field")?;
        let d = self.dim();
        let grad: Vec<Vec<f64>> = (0..d).map(|j| self.grid().diff(&f.values, j)).collect();
        let comps = (0..d)
            .map(|i| {
                let mut c = vec![0.0; self.len()];
                for (j, gj) in grad.iter().enumerate() {
                    let sij = s.get(i, j);
                    for n in 0..c.len() {
                        c[n] += sij[n] * gj[n];
                    }
                }
                c
            })
            .collect();
        Ok(VectorField::new(self.chart.id, comps))
    }

    /// L² defect of `Div(F(f)S) = F(f) Div S + F'(f) S(df, ·)`, summed over components.
    pub fn leibniz_defect(
        &self,
        s: &SymTensor2Field,
        f: &ScalarField,
        func: impl Fn(f64) -> f64,
        deriv: impl Fn(f64) -> f64,
    ) -> Result<f64, GeometryError> {
        let ff = f.map(&func);
        let lhs = self.div_tensor(&s.scaled(&ff.values))?;
        let div_s = self.div_tensor(s)?;
        let sdf = self.contract_gradient(s, f)?;
        let fp = f.map(&deriv);
        let mut total = 0.0;
        for i in 0..self.dim() {
            let r: Vec<f64> = (0..self.len())
                .map(|n| lhs.comps[i][n] - ff.values[n] * div_s.comps[i][n] - fp.values[n] * sdf.comps[i][n])
                .collect();
            total += self.norm(&r).powi(2);
        }
        Ok(total.sqrt())
    }

    /// `|∫ Λ(ψ) φ − ∫ ψ ((∇²φ)(a,a) + (∇_a a)(φ))|`.
    pub fn adjoint_defect(
        &self,
        psi: &ScalarField,
        phi: &ScalarField,
        a: &VectorField,
    ) -> Result<f64, GeometryError> {
        let lam = self.lambda(psi, a, LambdaMode::Direct)?;
        let (_, hess, nabla) = self.second_order_action(a, phi)?;
        let lhs: f64 = self.integrate(&lam.zip_with(phi, |p, q| p * q).values);
        let rhs_field: Vec<f64> = (0..self.len())
            .map(|n| psi.values[n] * (hess.values[n] + nabla.values[n]))
            .collect();
        Ok((lhs - self.integrate(&rhs_field)).abs())
    }
}

/// `â^{jk} = X^j X^k`.
pub fn hat(x: &VectorField) -> SymTensor2Field {
    let d = x.dim();
    let n = x.len();
    let mut out = SymTensor2Field::zeros(x.chart, d, n);
    for i in 0..d {
        for j in i..d {
            out.comps[sym(d, i, j)] = (0..n).map(|p| x.comps[i][p] * x.comps[j][p]).collect();
        }
    }
    debug_assert_eq!(out.comps.len(), pair_count(d));
    out
}
