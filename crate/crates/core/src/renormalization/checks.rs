//! Monte Carlo checks over batches of paths.
//!
//! The energy bound compared against is
//!
//! ```text
//! E sup_{t ≤ T} ‖ρ_t‖² ≤ exp(C̄ T) ‖ρ_0‖²,   C̄ = Σ_i (½‖Λ_i(1)‖_∞ + ‖(Div a_i)²‖_∞) + ‖Div u‖_∞,
//! ```
//!
//! and passes when the sample mean stays below the right side plus three standard
//! errors plus [`SCHEME_ALLOWANCE`]`·‖ρ_0‖²`. Grid energies `Σ w ρ²` are used throughout.

use std::collections::BTreeMap;

use serde::Serialize;

use super::{RenormError, RenormFunction};
use crate::spde::{
    coupled_increments, par_paths, Form, Recorder, SimConfig, SpdeError, SpdeProblem, StepObserver, TestFunction,
    WeakForm,
};

/// Share of `‖ρ_0‖²` granted to time-stepping error in energy comparisons.
pub const SCHEME_ALLOWANCE: f64 = 0.01;

pub const MIN_MC_PATHS: usize = 64;

/// Energy samples per path in reported trajectories.
const ENERGY_SAMPLES: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Bound {
    #[serde(rename = "Cbar")]
    pub cbar: f64,
    /// `exp(C̄T)‖ρ_0‖²`.
    pub rhs: f64,
    /// Sample mean of `sup_t ‖ρ_t‖²`.
    pub lhs: f64,
    /// Standard error of `lhs`.
    pub sigma: f64,
    pub allowance: f64,
    pub holds: bool,
}

impl Bound {
    fn new(cbar: f64, horizon: f64, e0: f64, sups: &[f64]) -> Self {
        let (lhs, sigma) = mean_and_error(sups);
        let rhs = (cbar * horizon).exp() * e0;
        let allowance = SCHEME_ALLOWANCE * e0;
        Self { cbar, rhs, lhs, sigma, allowance, holds: lhs <= rhs + 3.0 * sigma + allowance }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RefinementLevel {
    pub resolution: usize,
    pub dt: f64,
    pub residual: f64,
    /// Previous level's residual over this one.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RenormReport {
    pub terms: BTreeMap<String, f64>,
    pub residual: f64,
    pub refinement: Vec<RefinementLevel>,
    pub bound: Bound,
    /// `(t, mean ‖ρ_t‖², exp(C̄t)‖ρ_0‖²)`.
    pub energy: Vec<[f64; 3]>,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniquenessReport {
    /// `max |ρ|` over every state of every path started from zero.
    pub zero_sup: f64,
    /// `max |(ρ[ρ_0 + δ] − ρ[ρ_0]) − ρ[δ]|` over states and paths.
    pub linearity_defect: f64,
    /// Difference energies against the same bound.
    pub difference: Bound,
    pub pass: bool,
}

/// Smallest and largest density and energy along a path.
#[derive(Clone, Debug)]
struct Extremes {
    volume: Vec<f64>,
    lo: f64,
    hi: f64,
    energy_lo: f64,
    energy_hi: f64,
}

impl Extremes {
    fn new(problem: &SpdeProblem) -> Self {
        Self {
            volume: problem.geom.volume.clone(),
            lo: f64::INFINITY,
            hi: f64::NEG_INFINITY,
            energy_lo: f64::INFINITY,
            energy_hi: 0.0,
        }
    }
}

impl StepObserver for Extremes {
    fn visit(&mut self, _n: usize, _t: f64, rho: &[f64], _dw: Option<&[f64]>) {
        let e: f64 = self.volume.iter().zip(rho).map(|(w, r)| w * r * r).sum();
        self.energy_lo = self.energy_lo.min(e);
        self.energy_hi = self.energy_hi.max(e);
        for &r in rho {
            self.lo = self.lo.min(r);
            self.hi = self.hi.max(r);
        }
    }
}

fn mean_and_error(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct PathOutcome {
    terms: Vec<(&'static str, f64)>,
    residual: f64,
    extremes: Extremes,
    energy: Vec<(f64, f64, f64)>,
}

fn energy_table(cbar: f64, e0: f64, per_path: &[Vec<(f64, f64, f64)>]) -> Vec<[f64; 3]> {
    let p = per_path.len() as f64;
    (0..per_path[0].len())
        .map(|k| {
            let t = per_path[0][k].0;
            let mean = per_path.iter().map(|rows| rows[k].2).sum::<f64>() / p;
            [t, mean, (cbar * t).exp() * e0]
        })
        .collect()
}

/// Renormalized Itô weak-form residual for `f` and test function `psi` (`one` or
/// `fourier:k`), averaged over `cfg.paths`, with a refinement study of `levels` levels
/// that multiply nodes by `space` and divide `dt` by `time` (no study when `levels < 2`).
pub fn renorm_residual(
    cfg: &SimConfig,
    f: &RenormFunction,
    psi: &str,
    levels: usize,
    space: usize,
    time: usize,
) -> Result<RenormReport, RenormError> {
    let domain = cfg.domain()?;
    let problem = cfg.problem()?;
    let rho0 = domain.initial_density(&problem.geom);
    let tf = TestFunction::new(&problem, domain.test_function(&problem.geom, psi)?)?;
    let driver = cfg.driver(problem.coeffs.noises())?;
    let stride = (cfg.steps()? / ENERGY_SAMPLES).max(1);
    let outcomes = par_paths(cfg.paths, |path| -> Result<PathOutcome, SpdeError> {
        let inc = driver.increments(path);
        let mut wf = WeakForm::new(&tf, f, cfg.dt);
        let mut ex = Extremes::new(&problem);
        let mut rec = Recorder::new(&problem, stride);
        problem.run_path(&rho0, &inc, path, &mut [&mut wf, &mut ex, &mut rec])?;
        Ok(PathOutcome {
            residual: wf.terms.residual(Form::Ito),
            terms: wf.terms.named(),
            extremes: ex,
            energy: rec.rows,
        })
    })?;
    let lo = outcomes.iter().map(|o| o.extremes.lo).fold(f64::INFINITY, f64::min);
    let hi = outcomes.iter().map(|o| o.extremes.hi).fold(f64::NEG_INFINITY, f64::max);
    f.covers(lo, hi)?;

    let p = outcomes.len() as f64;
    let mut terms = BTreeMap::new();
    for o in &outcomes {
        for (name, v) in &o.terms {
            *terms.entry(name.to_string()).or_insert(0.0) += v / p;
        }
    }
    let residual = outcomes.iter().map(|o| o.residual).sum::<f64>() / p;
    let e0 = problem.energy(&rho0.values);
    let cbar = problem.coeffs.cbar();
    let sups: Vec<f64> = outcomes.iter().map(|o| o.extremes.energy_hi).collect();
    let bound = Bound::new(cbar, cfg.horizon, e0, &sups);
    let energy = energy_table(cbar, e0, &outcomes.iter().map(|o| o.energy.clone()).collect::<Vec<_>>());
    let refinement = if levels >= 2 { refinement_study(cfg, f, psi, levels, space, time)? } else { Vec::new() };
    let pass = bound.holds && refinement.iter().all(|l| l.ratio.is_none_or(|r| r >= 1.8));
    Ok(RenormReport { terms, residual, refinement, bound, energy, pass })
}

/// Mean residual on each level; level `l` has `space^l` times the nodes and `dt / time^l`,
/// all levels of one path driven by the same Brownian path.
pub fn refinement_study(
    cfg: &SimConfig,
    f: &RenormFunction,
    psi: &str,
    levels: usize,
    space: usize,
    time: usize,
) -> Result<Vec<RefinementLevel>, RenormError> {
    let domain = cfg.domain()?;
    let mut setups = Vec::with_capacity(levels);
    for l in 0..levels as u32 {
        let c = cfg.refined(space.pow(l), time.pow(l));
        let problem = c.problem()?;
        let rho0 = domain.initial_density(&problem.geom);
        let tf = TestFunction::new(&problem, domain.test_function(&problem.geom, psi)?)?;
        setups.push((c, problem, rho0, tf));
    }
    let driver = cfg.driver(setups[0].1.coeffs.noises())?;
    let per_path = par_paths(cfg.paths, |path| -> Result<Vec<(f64, f64, f64)>, SpdeError> {
        let incs = coupled_increments(&driver, time, levels, path);
        setups
            .iter()
            .zip(&incs)
            .map(|((c, problem, rho0, tf), inc)| {
                let mut wf = WeakForm::new(tf, f, c.dt);
                let mut ex = Extremes::new(problem);
                problem.run_path(rho0, inc, path, &mut [&mut wf, &mut ex])?;
                Ok((wf.terms.residual(Form::Ito), ex.lo, ex.hi))
            })
            .collect()
    })?;
    let lo = per_path.iter().flatten().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let hi = per_path.iter().flatten().map(|r| r.2).fold(f64::NEG_INFINITY, f64::max);
    f.covers(lo, hi)?;
    let p = per_path.len() as f64;
    let mut out: Vec<RefinementLevel> = Vec::with_capacity(levels);
    for (l, (c, ..)) in setups.iter().enumerate() {
        let residual = per_path.iter().map(|r| r[l].0).sum::<f64>() / p;
        let ratio = out.last().map(|prev| prev.residual / residual);
        out.push(RefinementLevel { resolution: c.resolution, dt: c.dt, residual, ratio });
    }
    Ok(out)
}

/// Sample mean of `sup_t ‖ρ_t‖²` against `exp(C̄T)‖ρ_0‖²`. The terms carry the energy
/// statistics, with `volume` for rescaling to normalized energies; `residual` is the
/// excess of the mean over the bound, zero when it holds without slack.
pub fn apriori_check(cfg: &SimConfig) -> Result<RenormReport, RenormError> {
    if cfg.paths < MIN_MC_PATHS {
        return Err(RenormError::McBudgetTooSmall { paths: cfg.paths, min: MIN_MC_PATHS });
    }
    let domain = cfg.domain()?;
    let problem = cfg.problem()?;
    let rho0 = domain.initial_density(&problem.geom);
    let driver = cfg.driver(problem.coeffs.noises())?;
    let stride = (cfg.steps()? / ENERGY_SAMPLES).max(1);
    let outcomes = par_paths(cfg.paths, |path| -> Result<(Extremes, Vec<(f64, f64, f64)>), SpdeError> {
        let inc = driver.increments(path);
        let mut ex = Extremes::new(&problem);
        let mut rec = Recorder::new(&problem, stride);
        problem.run_path(&rho0, &inc, path, &mut [&mut ex, &mut rec])?;
        Ok((ex, rec.rows))
    })?;
    let e0 = problem.energy(&rho0.values);
    let cbar = problem.coeffs.cbar();
    let sups: Vec<f64> = outcomes.iter().map(|o| o.0.energy_hi).collect();
    let bound = Bound::new(cbar, cfg.horizon, e0, &sups);
    let deviation = outcomes
        .iter()
        .map(|o| (o.0.energy_hi / e0 - 1.0).abs().max((o.0.energy_lo / e0 - 1.0).abs()))
        .fold(0.0, f64::max);
    let finals: Vec<f64> = outcomes.iter().map(|o| o.1.last().map_or(e0, |r| r.2)).collect();
    let volume: f64 = problem.geom.volume.iter().sum();
    let mut terms = BTreeMap::new();
    terms.insert("energy0".to_string(), e0);
    terms.insert("mean_final_energy".to_string(), mean_and_error(&finals).0);
    terms.insert("max_energy_deviation".to_string(), deviation);
    terms.insert("volume".to_string(), volume);
    terms.insert("div_u_l1_linf".to_string(), problem.coeffs.div_u_l1_linf(cfg.horizon));
    let energy = energy_table(cbar, e0, &outcomes.iter().map(|o| o.1.clone()).collect::<Vec<_>>());
    Ok(RenormReport {
        terms,
        residual: (bound.lhs - bound.rhs).max(0.0),
        refinement: Vec::new(),
        pass: bound.holds,
        bound,
        energy,
    })
}

/// Runs `ρ_0`, `ρ_0 + δ`, `δ` and `0` in lockstep on every path, `δ` the second Fourier
/// test mode, and compares.
pub fn uniqueness_check(cfg: &SimConfig) -> Result<UniquenessReport, RenormError> {
    let domain = cfg.domain()?;
    let problem = cfg.problem()?;
    let rho0 = domain.initial_density(&problem.geom).values;
    let delta = domain.test_function(&problem.geom, "fourier:2")?.values;
    let driver = cfg.driver(problem.coeffs.noises())?;
    problem.check_dt(cfg.dt)?;
    let sum: Vec<f64> = rho0.iter().zip(&delta).map(|(a, b)| a + b).collect();
    let zero = vec![0.0; rho0.len()];
    let per_path = par_paths(cfg.paths, |path| -> Result<(f64, f64, f64), SpdeError> {
        let inc = driver.increments(path);
        let mut states = [rho0.clone(), sum.clone(), delta.clone(), zero.clone()];
        let mut next = zero.clone();
        let mut zero_sup: f64 = 0.0;
        let mut defect: f64 = 0.0;
        let mut sup_diff = problem.energy(&delta);
        for n in 0..inc.steps() {
            for s in states.iter_mut() {
                problem.advance(s, inc.step(n), cfg.dt, &mut next);
                std::mem::swap(s, &mut next);
            }
            if states.iter().flatten().any(|v| !v.is_finite()) {
                return Err(SpdeError::NonFiniteState { path, step: n + 1 });
            }
            let [a, b, d, z] = &states;
            zero_sup = z.iter().fold(zero_sup, |m, v| m.max(v.abs()));
            let diff: Vec<f64> = b.iter().zip(a).map(|(x, y)| x - y).collect();
            defect = diff.iter().zip(d).fold(defect, |m, (x, y)| m.max((x - y).abs()));
            sup_diff = sup_diff.max(problem.energy(&diff));
        }
        Ok((zero_sup, defect, sup_diff))
    })?;
    let zero_sup = per_path.iter().map(|r| r.0).fold(0.0, f64::max);
    let linearity_defect = per_path.iter().map(|r| r.1).fold(0.0, f64::max);
    let sups: Vec<f64> = per_path.iter().map(|r| r.2).collect();
    let difference = Bound::new(problem.coeffs.cbar(), cfg.horizon, problem.energy(&delta), &sups);
    let pass = zero_sup == 0.0 && linearity_defect <= 1e-10 && difference.holds;
    Ok(UniquenessReport { zero_sup, linearity_defect, difference, pass })
}
