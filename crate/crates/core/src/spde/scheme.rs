//! Conservative Euler–Maruyama.
//!
//! With `J = √|h|` and `q^k = J ρ X^k`, the divergence is a difference of face fluxes,
//!
//! ```text
//! Div(ρX)_i = (1/J_i) Σ_k (F^k_{i+½} − F^k_{i−½}) / Δ_k,       F^k_{i+½} = ½ (q^k_i + q^k_{i+1}),
//! ```
//!
//! and `Λ(ρ) = Div(Div(ρa) a)` uses the compact face value of `J Div(ρa)`: its own-axis
//! part is `(q^k_{i+1} − q^k_i)/Δ_k`, its cross-axis part the face average of centered
//! differences. Both telescope, so `Σ_i w_i J_i ρ_i` moves only by roundoff on periodic
//! axes, and on closed axes as long as fluxes vanish next to the ends.
//!
//! Step: `ρ' = ρ − Div(ρu) dt − Σ_i Div(ρa_i) dW^i + ½ Σ_i Λ_i(ρ) dt`.

use super::{BrownianDriver, CoefficientSet, Increments, SpdeError};
use crate::geometry::fields::sym;
use crate::geometry::{ChartGeometry, ScalarField};

/// Mass may move by at most this much per step.
pub const MASS_DRIFT_PER_STEP: f64 = 1e-12;

const DELTA: f64 = 1e-12;
const NONE: usize = usize::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct SolutionState {
    pub t: f64,
    pub rho: ScalarField,
    pub path: u64,
    pub mass: f64,
}

/// Sees `ρ_n` for `n = 0..=steps`; `dw` is the increment leaving `ρ_n`, `None` for the
/// final state.
pub trait StepObserver {
    fn visit(&mut self, n: usize, t: f64, rho: &[f64], dw: Option<&[f64]>);
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathSummary {
    pub last: SolutionState,
    pub steps: usize,
    pub max_mass_drift: f64,
    /// `max_n ∫ρ_n² dV_h`.
    pub sup_energy: f64,
}

/// Every state of one path, for small runs.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub path: u64,
    pub increments: Increments,
    pub states: Vec<Vec<f64>>,
}

impl StepObserver for Trajectory {
    fn visit(&mut self, _n: usize, _t: f64, rho: &[f64], _dw: Option<&[f64]>) {
        self.states.push(rho.to_vec());
    }
}

impl Trajectory {
    pub fn replay(&self, obs: &mut dyn StepObserver) {
        let last = self.states.len() - 1;
        for (n, rho) in self.states.iter().enumerate() {
            let dw = (n < last).then(|| self.increments.step(n));
            obs.visit(n, n as f64 * self.increments.dt, rho, dw);
        }
    }
}

/// `(t, mass, l2_energy)` every `stride` steps and at the final time.
#[derive(Clone, Debug)]
pub struct Recorder {
    stride: usize,
    volume: Vec<f64>,
    pub rows: Vec<(f64, f64, f64)>,
}

impl Recorder {
    pub fn new(problem: &SpdeProblem, stride: usize) -> Self {
        Self { stride: stride.max(1), volume: problem.geom.volume.clone(), rows: Vec::new() }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,mass,l2_energy\n");
        for (t, m, e) in &self.rows {
            out.push_str(&format!("{t},{m:e},{e:e}\n"));
        }
        out
    }
}

impl StepObserver for Recorder {
    fn visit(&mut self, n: usize, t: f64, rho: &[f64], dw: Option<&[f64]>) {
        if n % self.stride == 0 || dw.is_none() {
            let mass = self.volume.iter().zip(rho).map(|(w, r)| w * r).sum();
            let energy = self.volume.iter().zip(rho).map(|(w, r)| w * r * r).sum();
            self.rows.push((t, mass, energy));
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpdeProblem {
    pub geom: ChartGeometry,
    pub coeffs: CoefficientSet,
    j: Vec<f64>,
    inv_j: Vec<f64>,
    h: Vec<f64>,
    plus: Vec<Vec<usize>>,
    minus: Vec<Vec<usize>>,
    /// `J u^k`.
    ju: Vec<Vec<f64>>,
    /// `J a_i^k`.
    ja: Vec<Vec<Vec<f64>>>,
    /// `½ (a_i^k(n) + a_i^k(n + e_k))`.
    a_face: Vec<Vec<Vec<f64>>>,
    dt_limit: f64,
}

#[inline]
fn at(v: &[f64], n: usize) -> f64 {
    if n == NONE {
        0.0
    } else {
        v[n]
    }
}

/// `0.25 min_n Δx_n² / (Σ_i |a_i|²_h + Δx_n |u|_h + δ)`, with `Δx_n` the shortest metric
/// length of a grid step at node `n`.
pub fn dt_max(geom: &ChartGeometry, coeffs: &CoefficientSet) -> f64 {
    let d = geom.dim();
    let grid = geom.grid();
    let mut best = f64::INFINITY;
    for n in 0..geom.len() {
        let h = geom.metric.at(n);
        let dx = (0..d).map(|k| h[sym(d, k, k)].sqrt() * grid.axis(k).spacing()).fold(f64::INFINITY, f64::min);
        let norm2 = |c: &Vec<Vec<f64>>| {
            let mut s = 0.0;
            for i in 0..d {
                for j in 0..d {
                    s += h[sym(d, i, j)] * c[i][n] * c[j][n];
                }
            }
            s
        };
        let a2: f64 = coeffs.a.iter().map(|a| norm2(&a.comps)).sum();
        let u = norm2(&coeffs.u.comps).sqrt();
        best = best.min(0.25 * dx * dx / (a2 + dx * u + DELTA));
    }
    best
}

impl SpdeProblem {
    pub fn new(geom: ChartGeometry, coeffs: CoefficientSet) -> Result<Self, SpdeError> {
        let len = geom.len();
        let d = geom.dim();
        let fits = |c: &Vec<Vec<f64>>| c.len() == d && c.iter().all(|v| v.len() == len);
        if !fits(&coeffs.u.comps) || !coeffs.a.iter().all(|a| fits(&a.comps)) {
            return Err(SpdeError::Mismatch("coefficients do not live on the simulation grid".into()));
        }
        let grid = geom.grid();
        let mut plus = Vec::with_capacity(d);
        let mut minus = Vec::with_capacity(d);
        for k in 0..d {
            let ax = grid.axis(k);
            let nk = ax.nodes;
            let (mut p, mut m) = (vec![NONE; len], vec![NONE; len]);
            for n in 0..len {
                let idx = grid.multi_index(n);
                let i = idx[k];
                let shift = |j: usize| {
                    let mut q = idx;
                    q[k] = j;
                    grid.flat(q)
                };
                if i + 1 < nk {
                    p[n] = shift(i + 1);
                } else if ax.periodic {
                    p[n] = shift(0);
                }
                if i > 0 {
                    m[n] = shift(i - 1);
                } else if ax.periodic {
                    m[n] = shift(nk - 1);
                }
            }
            plus.push(p);
            minus.push(m);
        }
        let j = geom.sqrt_det.clone();
        let inv_j = j.iter().map(|v| 1.0 / v).collect();
        let weight = |c: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            c.iter().map(|ck| ck.iter().zip(&j).map(|(x, s)| x * s).collect()).collect()
        };
        let ju = weight(&coeffs.u.comps);
        let ja = coeffs.a.iter().map(|a| weight(&a.comps)).collect();
        let a_face = coeffs
            .a
            .iter()
            .map(|a| {
                (0..d)
                    .map(|k| (0..len).map(|n| 0.5 * (a.comps[k][n] + at(&a.comps[k], plus[k][n]))).collect())
                    .collect()
            })
            .collect();
        let dt_limit = dt_max(&geom, &coeffs);
        Ok(Self {
            h: (0..d).map(|k| grid.axis(k).spacing()).collect(),
            j,
            inv_j,
            plus,
            minus,
            ju,
            ja,
            a_face,
            dt_limit,
            geom,
            coeffs,
        })
    }

    pub fn dt_max(&self) -> f64 {
        self.dt_limit
    }

    pub fn mass(&self, rho: &[f64]) -> f64 {
        self.geom.integrate(rho)
    }

    pub fn energy(&self, rho: &[f64]) -> f64 {
        self.geom.volume.iter().zip(rho).map(|(w, r)| w * r * r).sum()
    }

    /// `out += c · Div(ρX)` for `jx = J X`.
    fn add_div(&self, rho: &[f64], jx: &[Vec<f64>], c: f64, out: &mut [f64]) {
        for (k, jxk) in jx.iter().enumerate() {
            let s = c / (2.0 * self.h[k]);
            let (p, m) = (&self.plus[k], &self.minus[k]);
            for n in 0..out.len() {
                let qp = if p[n] == NONE { 0.0 } else { jxk[p[n]] * rho[p[n]] };
                let qm = if m[n] == NONE { 0.0 } else { jxk[m[n]] * rho[m[n]] };
                out[n] += s * self.inv_j[n] * (qp - qm);
            }
        }
    }

    /// `out += c · Λ_i(ρ)`.
    fn add_lambda(&self, rho: &[f64], i: usize, c: f64, out: &mut [f64]) {
        let d = self.geom.dim();
        let len = out.len();
        let q: Vec<Vec<f64>> = self.ja[i].iter().map(|jak| jak.iter().zip(rho).map(|(x, r)| x * r).collect()).collect();
        let cen: Vec<Vec<f64>> = if d > 1 {
            (0..d)
                .map(|m| {
                    let s = 1.0 / (2.0 * self.h[m]);
                    (0..len).map(|n| s * (at(&q[m], self.plus[m][n]) - at(&q[m], self.minus[m][n]))).collect()
                })
                .collect()
        } else {
            Vec::new()
        };
        let mut flux = vec![0.0; len];
        for k in 0..d {
            let (p, m) = (&self.plus[k], &self.minus[k]);
            let hk = self.h[k];
            for n in 0..len {
                flux[n] = if p[n] == NONE {
                    0.0
                } else {
                    let mut jphi = (q[k][p[n]] - q[k][n]) / hk;
                    for (mm, cm) in cen.iter().enumerate() {
                        if mm != k {
                            jphi += 0.5 * (cm[n] + cm[p[n]]);
                        }
                    }
                    self.a_face[i][k][n] * jphi
                };
            }
            let s = c / hk;
            for n in 0..len {
                out[n] += s * self.inv_j[n] * (flux[n] - at(&flux, m[n]));
            }
        }
    }

    /// Flux-form `Div(ρX)` for an arbitrary field on this grid.
    pub fn div_flux(&self, rho: &[f64], x: &crate::geometry::VectorField) -> Vec<f64> {
        let jx: Vec<Vec<f64>> = x.comps.iter().map(|c| c.iter().zip(&self.j).map(|(a, b)| a * b).collect()).collect();
        let mut out = vec![0.0; rho.len()];
        self.add_div(rho, &jx, 1.0, &mut out);
        out
    }

    /// Compact `Λ_i(ρ)` for noise field `i`.
    pub fn lambda(&self, rho: &[f64], i: usize) -> Vec<f64> {
        let mut out = vec![0.0; rho.len()];
        self.add_lambda(rho, i, 1.0, &mut out);
        out
    }

    fn step_into(&self, rho: &[f64], dw: &[f64], dt: f64, out: &mut [f64]) {
        out.copy_from_slice(rho);
        self.add_div(rho, &self.ju, -dt, out);
        for (i, &w) in dw.iter().enumerate() {
            self.add_div(rho, &self.ja[i], -w, out);
            self.add_lambda(rho, i, 0.5 * dt, out);
        }
    }

    /// One step into `out` without stability or shape checks.
    pub fn advance(&self, rho: &[f64], dw: &[f64], dt: f64, out: &mut [f64]) {
        self.step_into(rho, dw, dt, out);
    }

    pub fn check_dt(&self, dt: f64) -> Result<(), SpdeError> {
        if !(dt > 0.0) || dt > self.dt_limit {
            return Err(SpdeError::CflViolation { dt, dt_max: self.dt_limit });
        }
        Ok(())
    }

    fn check_increments(&self, dw: &[f64]) -> Result<(), SpdeError> {
        if dw.len() != self.coeffs.noises() {
            return Err(SpdeError::Mismatch(format!(
                "{} increments for {} noise fields",
                dw.len(),
                self.coeffs.noises()
            )));
        }
        Ok(())
    }

    pub fn ito_step(&self, state: &SolutionState, dw: &[f64], dt: f64) -> Result<SolutionState, SpdeError> {
        self.check_dt(dt)?;
        self.check_increments(dw)?;
        let mut next = vec![0.0; state.rho.len()];
        self.step_into(&state.rho.values, dw, dt, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SpdeError::NonFiniteState { path: state.path, step: 0 });
        }
        let mass = self.mass(&next);
        Ok(SolutionState { t: state.t + dt, rho: ScalarField::new(state.rho.chart, next), path: state.path, mass })
    }

    /// Integrates one path, showing every state to every observer.
    pub fn run_path(
        &self,
        rho0: &ScalarField,
        inc: &Increments,
        path: u64,
        observers: &mut [&mut dyn StepObserver],
    ) -> Result<PathSummary, SpdeError> {
        self.check_dt(inc.dt)?;
        if inc.noises != self.coeffs.noises() {
            return Err(SpdeError::Mismatch(format!(
                "{} noises driven, {} fields",
                inc.noises,
                self.coeffs.noises()
            )));
        }
        if rho0.len() != self.geom.len() {
            return Err(SpdeError::Mismatch("initial density does not live on the simulation grid".into()));
        }
        let dt = inc.dt;
        let mut rho = rho0.values.clone();
        let mut next = vec![0.0; rho.len()];
        let mut mass = self.mass(&rho);
        let mut sup_energy = self.energy(&rho);
        let mut max_mass_drift: f64 = 0.0;
        for n in 0..inc.steps() {
            let dw = inc.step(n);
            let t = n as f64 * dt;
            for o in observers.iter_mut() {
                o.visit(n, t, &rho, Some(dw));
            }
            self.step_into(&rho, dw, dt, &mut next);
            if next.iter().any(|v| !v.is_finite()) {
                return Err(SpdeError::NonFiniteState { path, step: n + 1 });
            }
            std::mem::swap(&mut rho, &mut next);
            let m = self.mass(&rho);
            max_mass_drift = max_mass_drift.max((m - mass).abs());
            mass = m;
            sup_energy = sup_energy.max(self.energy(&rho));
        }
        let t = inc.steps() as f64 * dt;
        for o in observers.iter_mut() {
            o.visit(inc.steps(), t, &rho, None);
        }
        Ok(PathSummary {
            last: SolutionState { t, rho: ScalarField::new(rho0.chart, rho), path, mass },
            steps: inc.steps(),
            max_mass_drift,
            sup_energy,
        })
    }

    /// Whole trajectory of path `path` under `driver`.
    pub fn simulate(&self, rho0: &ScalarField, driver: &BrownianDriver, path: u64) -> Result<Trajectory, SpdeError> {
        let inc = driver.increments(path);
        self.simulate_with(rho0, inc, path)
    }

    pub fn simulate_with(&self, rho0: &ScalarField, inc: Increments, path: u64) -> Result<Trajectory, SpdeError> {
        let mut traj = Trajectory { path, increments: inc.clone(), states: Vec::with_capacity(inc.steps() + 1) };
        self.run_path(rho0, &inc, path, &mut [&mut traj])?;
        Ok(traj)
    }
}
