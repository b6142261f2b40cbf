//! Browser demo: three small operations over the core crate, each returning flat
//! `f64` arrays so the page can draw them without any glue beyond typed arrays.
//!
//! * [`truncation_curves`]: `F_μ, F_μ', F_μ'', G_μ` sampled on `|ξ| ≤ 3√μ`.
//! * [`commutator_norms`]: `‖r_ε‖` along the ε ladder on the 1-d torus fixture.
//! * [`density_paths`]: one seeded path of the stochastic transport on the 1-d torus,
//!   as snapshots of `ρ`.

use chartflow::commutators::{fixtures, run_study, CommutatorKind};
use chartflow::regularization::EPS_LADDER;
use chartflow::renormalization::TruncationFamily;
use chartflow::spde::{Domain, SimConfig, Trajectory};

/// Rows `[ξ, F, F', F'', G]`, flattened, `samples` rows.
pub fn truncation_curves(mu: f64, samples: usize) -> Result<Vec<f64>, String> {
    let fam = TruncationFamily::new(mu).map_err(|e| e.to_string())?;
    let r = 3.0 * mu.sqrt();
    let n = samples.max(2);
    let mut out = Vec::with_capacity(5 * n);
    for k in 0..n {
        let xi = -r + 2.0 * r * k as f64 / (n - 1) as f64;
        out.extend([xi, fam.f(xi), fam.df(xi), fam.d2f(xi), fam.g(xi)]);
    }
    Ok(out)
}

/// Pairs `[ε, ‖·‖]` for `kind` (`r`, `rt`, `rb`, `rstar`, `ru`, `c2`, `R`), then the fitted slope.
pub fn commutator_norms(kind: &str, nodes: usize, rough: bool) -> Result<Vec<f64>, String> {
    let kind: CommutatorKind = kind.parse().map_err(|e: chartflow::commutators::CommutatorError| e.to_string())?;
    let fx = fixtures::by_name("flat-torus-1d", Some(nodes), rough).map_err(|e| e.to_string())?;
    let t = run_study(kind, &fx, &EPS_LADDER).map_err(|e| e.to_string())?;
    let mut out: Vec<f64> = t.rows.iter().flat_map(|r| [r.eps, r.l2_norm]).collect();
    out.push(t.slope);
    Ok(out)
}

/// `frames` snapshots of `ρ` on `nodes` points (first row: the node coordinates).
pub fn density_paths(preset: &str, nodes: usize, seed: u64, horizon: f64, frames: usize) -> Result<Vec<f64>, String> {
    let d = Domain::Torus1d;
    let probe = SimConfig {
        manifold: d.name().into(),
        resolution: nodes,
        preset: preset.into(),
        dt: 1.0,
        horizon,
        paths: 1,
        seed,
    };
    let problem = probe.problem().map_err(|e| e.to_string())?;
    // largest step of the form horizon / k under the stability limit
    let steps = (horizon / (0.9 * problem.dt_max())).ceil().max(1.0);
    let cfg = SimConfig { dt: horizon / steps, ..probe };
    let driver = cfg.driver(problem.coeffs.noises()).map_err(|e| e.to_string())?;
    let rho0 = d.initial_density(&problem.geom);
    let traj: Trajectory = problem.simulate(&rho0, &driver, 0).map_err(|e| e.to_string())?;
    let mut out: Vec<f64> = (0..nodes).map(|k| problem.geom.grid().point(k)[0]).collect();
    let last = traj.states.len() - 1;
    let frames = frames.max(2);
    for f in 0..frames {
        out.extend_from_slice(&traj.states[f * last / (frames - 1)]);
    }
    Ok(out)
}

#[cfg(target_arch = "wasm32")]
mod web {
    use wasm_bindgen::prelude::*;

    fn js(e: String) -> JsValue {
        JsValue::from_str(&e)
    }

    #[wasm_bindgen]
    pub fn truncation_curves(mu: f64, samples: usize) -> Result<Vec<f64>, JsValue> {
        super::truncation_curves(mu, samples).map_err(js)
    }

    #[wasm_bindgen]
    pub fn commutator_norms(kind: &str, nodes: usize, rough: bool) -> Result<Vec<f64>, JsValue> {
        super::commutator_norms(kind, nodes, rough).map_err(js)
    }

    #[wasm_bindgen]
    pub fn density_paths(preset: &str, nodes: usize, seed: u64, horizon: f64, frames: usize) -> Result<Vec<f64>, JsValue> {
        super::density_paths(preset, nodes, seed, horizon, frames).map_err(js)
    }
}
