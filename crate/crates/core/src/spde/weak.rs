//! Weak formulations along a discrete path.
//!
//! For `F ∈ C²`, `G_F(ξ) = ξF'(ξ) − F(ξ)` and a test function ψ, the Itô identity checked is
//!
//! ```text
//! ∫F(ρ_T)ψ = ∫F(ρ_0)ψ + ∫∫F u(ψ) + Σ∫∫F a_i(ψ) dW^i + ½Σ∫∫F a_i(a_i(ψ))
//!          − ∫∫G_F Div u ψ − Σ∫∫G_F Div a_i ψ dW^i − ½Σ∫∫Λ_i(1) G_F ψ
//!          + ½Σ∫∫F''(ρ)(ρ Div a_i)² ψ − Σ∫∫G_F ā_i(ψ)
//! ```
//!
//! with left-endpoint sums in time. `F(ξ) = ξ` gives `G_F = 0`, `F'' = 0`: the plain Itô
//! weak form, evaluated by the very same code. The Stratonovich form
//! `∫ρ_Tψ = ∫ρ_0ψ + ∫∫ρ u(ψ) + Σ∫∫ρ a_i(ψ) ∘ dW^i` uses midpoint stochastic sums and
//! is only meaningful for linear `F`.
//!
//! `a_i(a_i(ψ))` enters as `(∇²ψ)(a_i, a_i) + (∇_{a_i}a_i)(ψ)`; [`TestFunction`] records
//! how far that is from the composed derivative.

use std::str::FromStr;

use serde::Serialize;

use super::{SpdeError, SpdeProblem, StepObserver, Trajectory};
use crate::geometry::{ChartGeometry, GeometryError, ScalarField, VectorField};

pub trait Nonlinearity: Sync {
    fn f(&self, x: f64) -> f64;
    fn df(&self, x: f64) -> f64;
    fn d2f(&self, x: f64) -> f64;
    fn g(&self, x: f64) -> f64 {
        x * self.df(x) - self.f(x)
    }
}

/// `F(ξ) = ξ`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl Nonlinearity for Identity {
    fn f(&self, x: f64) -> f64 {
        x
    }
    fn df(&self, _: f64) -> f64 {
        1.0
    }
    fn d2f(&self, _: f64) -> f64 {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Form {
    Ito,
    Stratonovich,
}

impl FromStr for Form {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "ito" => Ok(Self::Ito),
            "stratonovich" => Ok(Self::Stratonovich),
            other => Err(format!("unknown form '{other}'")),
        }
    }
}

/// The Itô drift correction for ψ is half of the returned `a(a(ψ))`.
pub fn strat_to_ito_correction(
    geom: &ChartGeometry,
    psi: &ScalarField,
    a: &VectorField,
) -> Result<ScalarField, GeometryError> {
    Ok(geom.second_order_action(a, psi)?.0)
}

/// ψ and every derived quantity the weak forms pair with, premultiplied by the
/// volume weights so each spatial integral is a dot product.
#[derive(Clone, Debug)]
pub struct TestFunction {
    pub psi: ScalarField,
    w_psi: Vec<f64>,
    w_u: Vec<f64>,
    w_a: Vec<Vec<f64>>,
    w_aa: Vec<Vec<f64>>,
    w_div_u: Vec<f64>,
    w_div_a: Vec<Vec<f64>>,
    w_lambda: Vec<Vec<f64>>,
    w_div_a_sq: Vec<Vec<f64>>,
    w_abar: Vec<Vec<f64>>,
    /// Largest `‖a_i(a_i(ψ)) − (∇²ψ)(a_i,a_i) − (∇_{a_i}a_i)(ψ)‖_{L²}`.
    pub composition_defect: f64,
}

impl TestFunction {
    pub fn new(problem: &SpdeProblem, psi: ScalarField) -> Result<Self, SpdeError> {
        let geom = &problem.geom;
        let c = &problem.coeffs;
        if psi.len() != geom.len() {
            return Err(SpdeError::Mismatch("test function does not live on the simulation grid".into()));
        }
        let vol = &geom.volume;
        let weigh = |f: &[f64]| -> Vec<f64> { vol.iter().zip(f).map(|(w, v)| w * v).collect() };
        let times_psi = |f: &[f64]| -> Vec<f64> { weigh(&f.iter().zip(&psi.values).map(|(v, p)| v * p).collect::<Vec<_>>()) };
        let mut tf = Self {
            w_psi: weigh(&psi.values),
            w_u: weigh(&geom.apply(&c.u, &psi)?.values),
            w_div_u: times_psi(&c.div_u.values),
            w_a: Vec::new(),
            w_aa: Vec::new(),
            w_div_a: Vec::new(),
            w_lambda: Vec::new(),
            w_div_a_sq: Vec::new(),
            w_abar: Vec::new(),
            composition_defect: 0.0,
            psi: psi.clone(),
        };
        for i in 0..c.noises() {
            let (composed, hess, nabla) = geom.second_order_action(&c.a[i], &psi)?;
            let split: Vec<f64> = hess.values.iter().zip(&nabla.values).map(|(h, n)| h + n).collect();
            let diff: Vec<f64> = composed.values.iter().zip(&split).map(|(x, y)| x - y).collect();
            tf.composition_defect = tf.composition_defect.max(geom.norm(&diff));
            tf.w_a.push(weigh(&geom.apply(&c.a[i], &psi)?.values));
            tf.w_aa.push(weigh(&split));
            tf.w_div_a.push(times_psi(&c.div_a[i].values));
            tf.w_lambda.push(times_psi(&c.lambda_one[i].values));
            let sq: Vec<f64> = c.div_a[i].values.iter().map(|d| d * d).collect();
            tf.w_div_a_sq.push(times_psi(&sq));
            tf.w_abar.push(weigh(&geom.apply(&c.a_bar[i], &psi)?.values));
        }
        Ok(tf)
    }
}

/// Accumulated weak-form terms, named as in the module docs.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct WeakTerms {
    /// `∫F(ρ_T)ψ`.
    pub final_value: f64,
    /// `∫F(ρ_0)ψ`.
    pub initial: f64,
    pub drift_u: f64,
    pub noise_a: f64,
    pub noise_a_midpoint: f64,
    pub ito_correction: f64,
    pub gf_div_u: f64,
    pub gf_div_a: f64,
    pub gf_lambda_one: f64,
    pub f2_div_a_sq: f64,
    pub gf_abar: f64,
}

impl WeakTerms {
    pub fn rhs(&self, form: Form) -> f64 {
        match form {
            Form::Ito => {
                self.initial
                    + self.drift_u
                    + self.noise_a
                    + self.ito_correction
                    + self.gf_div_u
                    + self.gf_div_a
                    + self.gf_lambda_one
                    + self.f2_div_a_sq
                    + self.gf_abar
            }
            Form::Stratonovich => self.initial + self.drift_u + self.noise_a_midpoint,
        }
    }

    pub fn residual(&self, form: Form) -> f64 {
        (self.final_value - self.rhs(form)).abs()
    }

    pub fn named(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("final_value", self.final_value),
            ("initial", self.initial),
            ("drift_u", self.drift_u),
            ("noise_a", self.noise_a),
            ("noise_a_midpoint", self.noise_a_midpoint),
            ("ito_correction", self.ito_correction),
            ("gf_div_u", self.gf_div_u),
            ("gf_div_a", self.gf_div_a),
            ("gf_lambda_one", self.gf_lambda_one),
            ("f2_div_a_sq", self.f2_div_a_sq),
            ("gf_abar", self.gf_abar),
        ]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Streaming evaluation of [`WeakTerms`] for one path.
pub struct WeakForm<'a, N: Nonlinearity> {
    tf: &'a TestFunction,
    f: &'a N,
    dt: f64,
    pub terms: WeakTerms,
    prev_dw: Vec<f64>,
    fv: Vec<f64>,
    gv: Vec<f64>,
    q: Vec<f64>,
}

impl<'a, N: Nonlinearity> WeakForm<'a, N> {
    pub fn new(tf: &'a TestFunction, f: &'a N, dt: f64) -> Self {
        let n = tf.psi.len();
        Self {
            tf,
            f,
            dt,
            terms: WeakTerms::default(),
            prev_dw: Vec::new(),
            fv: vec![0.0; n],
            gv: vec![0.0; n],
            q: vec![0.0; n],
        }
    }
}

impl<N: Nonlinearity> StepObserver for WeakForm<'_, N> {
    fn visit(&mut self, n: usize, _t: f64, rho: &[f64], dw: Option<&[f64]>) {
        let tf = self.tf;
        let dt = self.dt;
        for (k, &r) in rho.iter().enumerate() {
            self.fv[k] = self.f.f(r);
        }
        let t = &mut self.terms;
        let a_vals: Vec<f64> = tf.w_a.iter().map(|w| dot(&self.fv, w)).collect();
        for (i, a) in a_vals.iter().enumerate() {
            if let Some(&w) = self.prev_dw.get(i) {
                t.noise_a_midpoint += 0.5 * a * w;
            }
        }
        if n == 0 {
            t.initial = dot(&self.fv, &tf.w_psi);
        }
        let Some(dw) = dw else {
            t.final_value = dot(&self.fv, &tf.w_psi);
            return;
        };
        for (k, &r) in rho.iter().enumerate() {
            self.gv[k] = self.f.g(r);
            self.q[k] = self.f.d2f(r) * r * r;
        }
        t.drift_u += dt * dot(&self.fv, &tf.w_u);
        t.gf_div_u -= dt * dot(&self.gv, &tf.w_div_u);
        for (i, &w) in dw.iter().enumerate() {
            t.noise_a += w * a_vals[i];
            t.noise_a_midpoint += 0.5 * a_vals[i] * w;
            t.ito_correction += 0.5 * dt * dot(&self.fv, &tf.w_aa[i]);
            t.gf_div_a -= w * dot(&self.gv, &tf.w_div_a[i]);
            t.gf_lambda_one -= 0.5 * dt * dot(&self.gv, &tf.w_lambda[i]);
            t.f2_div_a_sq += 0.5 * dt * dot(&self.q, &tf.w_div_a_sq[i]);
            t.gf_abar -= dt * dot(&self.gv, &tf.w_abar[i]);
        }
        self.prev_dw = dw.to_vec();
    }
}

/// All weak-form terms of a stored trajectory for nonlinearity `f`.
pub fn weak_terms<N: Nonlinearity>(traj: &Trajectory, tf: &TestFunction, f: &N) -> WeakTerms {
    let mut wf = WeakForm::new(tf, f, traj.increments.dt);
    traj.replay(&mut wf);
    wf.terms
}

/// `|LHS − RHS|` of the linear weak form at the final time.
pub fn weak_form_residual(
    problem: &SpdeProblem,
    traj: &Trajectory,
    psi: &ScalarField,
    form: Form,
) -> Result<f64, SpdeError> {
    let tf = TestFunction::new(problem, psi.clone())?;
    Ok(weak_terms(traj, &tf, &Identity).residual(form))
}
