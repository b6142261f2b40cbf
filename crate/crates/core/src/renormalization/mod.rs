//! Renormalizing nonlinearities `F`, `G_F(ξ) = ξF'(ξ) − F(ξ)`, the truncation family
//! `F_μ(ξ) = μ χ(ξ²/μ)`, and checks built on them: cancellation identities, the
//! renormalized weak-form residual, the energy bound and linearity of the solution map.

pub mod checks;
pub mod identities;
pub mod spline;
pub mod truncation;

use std::path::Path;

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::spde::{Nonlinearity, SpdeError};

pub use checks::{
    apriori_check, refinement_study, renorm_residual, uniqueness_check, Bound, RefinementLevel,
    RenormReport, UniquenessReport, MIN_MC_PATHS, SCHEME_ALLOWANCE,
};
pub use identities::{cancellation_checks, CancellationResiduals};
pub use spline::CubicSpline;
pub use truncation::{chi, fmu_suite, limit_errors, FmuReport, TruncationFamily};

#[derive(Debug, Error)]
pub enum RenormError {
    #[error(transparent)]
    Spde(#[from] SpdeError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("{display} fails at xi = {xi}: {lhs:e} > {rhs:e}")]
    InequalityViolation { display: String, xi: f64, lhs: f64, rhs: f64 },
    #[error("{name}: density values in [{lo}, {hi}] leave the certified range")]
    UnboundedRenormFunction { name: String, lo: f64, hi: f64 },
    #[error("{0}: derivative does not match the difference quotient")]
    DerivativeMismatch(String),
    #[error("{paths} Monte Carlo paths, at least {min} required")]
    McBudgetTooSmall { paths: usize, min: usize },
    #[error("mu must be positive and finite, got {0}")]
    InvalidMu(f64),
    #[error("spline: {0}")]
    Spline(String),
    #[error("unknown nonlinearity '{0}'; expected linear, quadratic-trunc:MU or custom-spline:FILE")]
    BadSpec(String),
}

/// Sup bounds of `|F|, |F'|, |F''|` over `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Certificate {
    pub lo: f64,
    pub hi: f64,
    pub sup_f: f64,
    pub sup_df: f64,
    pub sup_d2f: f64,
}

#[derive(Clone, Debug)]
enum Profile {
    Linear,
    /// `Σ c_k ξ^k`.
    Polynomial(Vec<f64>),
    Truncated(TruncationFamily),
    Spline(CubicSpline),
}

#[derive(Clone, Debug)]
pub struct RenormFunction {
    pub name: String,
    profile: Profile,
    pub certificate: Option<Certificate>,
}

/// Range over which the identity is certified.
pub const LINEAR_RANGE: f64 = 1e6;

const PROBES: usize = 2001;
const FD_STEP: f64 = 1e-5;
const FD_TOL: f64 = 1e-6;

impl RenormFunction {
    pub fn linear() -> Self {
        Self {
            name: "linear".into(),
            profile: Profile::Linear,
            certificate: Some(Certificate {
                lo: -LINEAR_RANGE,
                hi: LINEAR_RANGE,
                sup_f: LINEAR_RANGE,
                sup_df: 1.0,
                sup_d2f: 0.0,
            }),
        }
    }

    /// Uncertified polynomial; see [`RenormFunction::certify`].
    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Self { name: format!("polynomial{coeffs:?}"), profile: Profile::Polynomial(coeffs), certificate: None }
    }

    /// `F_μ`, certified on all of ℝ by its closed-form bounds.
    pub fn truncated(mu: f64) -> Result<Self, RenormError> {
        let fam = TruncationFamily::new(mu)?;
        let certificate = Some(Certificate {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            sup_f: 2.0 * mu,
            sup_df: 2.0 * 2f64.sqrt() * fam.a0 * mu.sqrt(),
            sup_d2f: 8.0 * fam.a1 + 2.0 * fam.a0,
        });
        Ok(Self { name: format!("quadratic-trunc:{mu}"), profile: Profile::Truncated(fam), certificate })
    }

    /// Natural cubic spline, certified between its end knots.
    pub fn spline(s: CubicSpline) -> Self {
        let (lo, hi) = s.range();
        let mut f = Self { name: "custom-spline".into(), profile: Profile::Spline(s), certificate: None };
        f.certificate = Some(f.probe_certificate(lo, hi));
        f
    }

    /// `linear`, `quadratic-trunc:MU`, or `custom-spline:FILE` (relative paths against `dir`).
    pub fn parse(spec: &str, dir: &Path) -> Result<Self, RenormError> {
        let spec = spec.trim();
        if spec == "linear" {
            return Ok(Self::linear());
        }
        if let Some(mu) = spec.strip_prefix("quadratic-trunc:") {
            let mu: f64 = mu.trim().parse().map_err(|_| RenormError::BadSpec(spec.into()))?;
            return Self::truncated(mu);
        }
        let file = spec
            .strip_prefix("custom-spline:")
            .or_else(|| spec.strip_prefix("custom-spline "))
            .ok_or_else(|| RenormError::BadSpec(spec.into()))?
            .trim();
        let path = dir.join(file);
        let text = std::fs::read_to_string(&path).map_err(|e| RenormError::Spline(format!("{}: {e}", path.display())))?;
        let mut f = Self::spline(CubicSpline::parse(&text)?);
        f.name = format!("custom-spline:{file}");
        Ok(f)
    }

    fn probe_certificate(&self, lo: f64, hi: f64) -> Certificate {
        let mut c = Certificate { lo, hi, sup_f: 0.0, sup_df: 0.0, sup_d2f: 0.0 };
        for k in 0..PROBES {
            let x = lo + (hi - lo) * k as f64 / (PROBES - 1) as f64;
            c.sup_f = c.sup_f.max(self.f(x).abs());
            c.sup_df = c.sup_df.max(self.df(x).abs());
            c.sup_d2f = c.sup_d2f.max(self.d2f(x).abs());
        }
        c
    }

    /// Attach probe-grid sup bounds over `[lo, hi]`.
    pub fn certify(mut self, lo: f64, hi: f64) -> Self {
        self.certificate = Some(self.probe_certificate(lo, hi));
        self
    }

    /// Probe range for derivative checks: the certified range, clipped to `[−10, 10]`
    /// (`[−3√μ, 3√μ]` for `F_μ`).
    pub fn probe_range(&self) -> (f64, f64) {
        if let Profile::Truncated(t) = &self.profile {
            let r = 3.0 * t.mu.sqrt();
            return (-r, r);
        }
        match &self.certificate {
            Some(c) => (c.lo.max(-10.0), c.hi.min(10.0)),
            None => (-10.0, 10.0),
        }
    }

    /// Points where `F'''` may jump.
    fn breaks(&self) -> Vec<f64> {
        match &self.profile {
            Profile::Truncated(t) => {
                let (a, b) = (t.mu.sqrt(), (2.0 * t.mu).sqrt());
                vec![-b, -a, a, b]
            }
            Profile::Spline(s) => s.knots().to_vec(),
            _ => Vec::new(),
        }
    }

    /// Difference quotients of `F` and `F'` against `F'` and `F''` on the probe grid.
    pub fn validate(&self) -> Result<(), RenormError> {
        let (lo, hi) = self.probe_range();
        let breaks = self.breaks();
        for k in 0..PROBES {
            let x = lo + (hi - lo) * (k as f64 + 0.5) / PROBES as f64;
            // a stencil across a jump of F''' measures the jump, not F''
            if breaks.iter().any(|b| (x - b).abs() <= 2.0 * FD_STEP) {
                continue;
            }
            let fd1 = (self.f(x + FD_STEP) - self.f(x - FD_STEP)) / (2.0 * FD_STEP);
            if (fd1 - self.df(x)).abs() > FD_TOL * self.df(x).abs().max(1.0) {
                return Err(RenormError::DerivativeMismatch(format!("{} F' at {x}", self.name)));
            }
            let fd2 = (self.df(x + FD_STEP) - self.df(x - FD_STEP)) / (2.0 * FD_STEP);
            if (fd2 - self.d2f(x)).abs() > FD_TOL * self.d2f(x).abs().max(1.0) {
                return Err(RenormError::DerivativeMismatch(format!("{} F'' at {x}", self.name)));
            }
        }
        Ok(())
    }

    /// Errors unless `[lo, hi]` lies inside the certified range.
    pub fn covers(&self, lo: f64, hi: f64) -> Result<(), RenormError> {
        match &self.certificate {
            Some(c) if c.lo <= lo && hi <= c.hi => Ok(()),
            _ => Err(RenormError::UnboundedRenormFunction { name: self.name.clone(), lo, hi }),
        }
    }

    pub fn family(&self) -> Option<&TruncationFamily> {
        match &self.profile {
            Profile::Truncated(t) => Some(t),
            _ => None,
        }
    }
}

fn poly(c: &[f64], x: f64, deriv: usize) -> f64 {
    let mut acc = 0.0;
    for (k, &ck) in c.iter().enumerate().skip(deriv).rev() {
        let factor: f64 = ((k - deriv + 1)..=k).map(|j| j as f64).product();
        acc = acc * x + ck * factor;
    }
    acc
}

impl Nonlinearity for RenormFunction {
    fn f(&self, x: f64) -> f64 {
        match &self.profile {
            Profile::Linear => x,
            Profile::Polynomial(c) => poly(c, x, 0),
            Profile::Truncated(t) => t.f(x),
            Profile::Spline(s) => s.eval(x, 0),
        }
    }
    fn df(&self, x: f64) -> f64 {
        match &self.profile {
            Profile::Linear => 1.0,
            Profile::Polynomial(c) => poly(c, x, 1),
            Profile::Truncated(t) => t.df(x),
            Profile::Spline(s) => s.eval(x, 1),
        }
    }
    fn d2f(&self, x: f64) -> f64 {
        match &self.profile {
            Profile::Linear => 0.0,
            Profile::Polynomial(c) => poly(c, x, 2),
            Profile::Truncated(t) => t.d2f(x),
            Profile::Spline(s) => s.eval(x, 2),
        }
    }
}

/// `G_F(ξ) = ξF'(ξ) − F(ξ)` at every sample.
pub fn gf_eval(f: &dyn Nonlinearity, xi: &[f64]) -> Vec<f64> {
    xi.iter().map(|&x| f.g(x)).collect()
}
