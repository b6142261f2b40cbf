//! Dispatch of one configured check.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use super::{Check, HarnessError, RunConfig, RunManifest};
use crate::commutators::{fixtures as cfx, run_study, CommutatorKind};
use crate::geometry::fixtures;
use crate::regularization::make_partition;
use crate::regularization::partition::{COVERAGE_SAMPLES, COVERAGE_SEED};
use crate::renormalization::{apriori_check, renorm_residual, uniqueness_check, RenormFunction, RenormReport};
use crate::spde::{par_paths, Recorder, SpdeError, MASS_DRIFT_PER_STEP};

/// Largest `|Σ𝒰 − 1|` an atlas may show.
pub const PARTITION_TOLERANCE: f64 = 1e-12;
/// Largest decomposition defect of `R` on the ladder.
pub const DECOMPOSITION_TOLERANCE: f64 = 1e-4;
/// Rows per trajectory CSV, besides the final state.
pub const RECORD_ROWS: usize = 500;

pub struct RunOutcome {
    pub manifest: RunManifest,
    /// What the command prints: JSON, or CSV for rate studies.
    pub stdout: String,
}

#[derive(Serialize)]
struct ChartReport {
    chart: usize,
    name: String,
    max_sum_defect: f64,
    /// `null` for a chart without closed axes.
    eps_kappa: Option<f64>,
    eps0: f64,
}

#[derive(Serialize)]
struct SimulateSummary {
    paths: usize,
    steps: usize,
    resolution: usize,
    cbar: f64,
    energy0: f64,
    max_mass_drift_per_step: f64,
    max_sup_energy: f64,
}

fn json<T: Serialize>(v: &T) -> Result<String, HarnessError> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

/// `t,mean_l2_energy,bound` rows of a report.
fn energy_csv(report: &RenormReport) -> String {
    let mut s = String::from("t,mean_l2_energy,bound\n");
    for [t, e, b] in &report.energy {
        s.push_str(&format!("{t},{e:e},{b:e}\n"));
    }
    s
}

/// Run `cfg`, write its artifacts and manifest under `cfg.out` when set.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutcome, HarnessError> {
    cfg.validate()?;
    let start = Instant::now();
    let out = cfg.out.as_deref();
    let mut m = RunManifest::new(cfg.entries());
    let stdout = match cfg.check {
        Check::AtlasCheck => atlas_check(cfg, &mut m, out)?,
        Check::CommutatorRate => commutator_rate(cfg, &mut m, out)?,
        Check::Simulate => simulate(cfg, &mut m, out)?,
        Check::RenormCheck => {
            let f = RenormFunction::parse(&cfg.f_spec, Path::new("."))?;
            if let Some(file) = cfg.f_spec.strip_prefix("custom-spline:").or_else(|| cfg.f_spec.strip_prefix("custom-spline ")) {
                m.add_input(Path::new(file.trim()))?;
            }
            f.validate()?;
            let r = renorm_residual(&cfg.sim()?, &f, &cfg.psi, cfg.refine_levels, cfg.refine_space, cfg.refine_time)?;
            report(&mut m, out, "renorm", &r)?
        }
        Check::Apriori => {
            let r = apriori_check(&cfg.sim()?)?;
            report(&mut m, out, "apriori", &r)?
        }
        Check::Uniqueness => {
            let r = uniqueness_check(&cfg.sim()?)?;
            let text = json(&r)?;
            m.add_artifact(out, "uniqueness_report.json", text.as_bytes())?;
            m.record("zero-stays-zero", r.zero_sup == 0.0, format!("max |rho| = {:e}", r.zero_sup));
            m.record("linearity", r.linearity_defect <= 1e-10, format!("defect {:e}", r.linearity_defect));
            m.record("difference-bound", r.difference.holds, format!("{:e} vs {:e}", r.difference.lhs, r.difference.rhs));
            text
        }
    };
    m.seal();
    m.wall_clock_seconds = start.elapsed().as_secs_f64();
    if let Some(dir) = out {
        m.write(dir)?;
    }
    Ok(RunOutcome { manifest: m, stdout })
}

fn report(m: &mut RunManifest, out: Option<&Path>, stem: &str, r: &RenormReport) -> Result<String, HarnessError> {
    let text = json(r)?;
    m.add_artifact(out, &format!("{stem}_report.json"), text.as_bytes())?;
    m.add_artifact(out, &format!("{stem}_energy.csv"), energy_csv(r).as_bytes())?;
    m.record(
        "energy-bound",
        r.bound.holds,
        format!("E sup = {:e} +- {:e}, bound {:e}", r.bound.lhs, r.bound.sigma, r.bound.rhs),
    );
    for l in &r.refinement {
        if let Some(ratio) = l.ratio {
            m.record(&format!("refinement-{}", l.resolution), ratio >= 1.8, format!("ratio {ratio:.3}"));
        }
    }
    Ok(text)
}

fn atlas_check(cfg: &RunConfig, m: &mut RunManifest, out: Option<&Path>) -> Result<String, HarnessError> {
    let atlas = fixtures::resolve(&cfg.manifold, cfg.resolution)?;
    if !fixtures::NAMES.contains(&cfg.manifold.as_str()) {
        m.add_input(Path::new(&cfg.manifold))?;
    }
    let pou = make_partition(&atlas, cfg.margin)?;
    let defect = pou.sum_defect(&atlas.reference_points(COVERAGE_SAMPLES, COVERAGE_SEED));
    let rows: Vec<ChartReport> = atlas
        .charts
        .iter()
        .zip(&pou.eps_kappa)
        .map(|(c, &e)| ChartReport {
            chart: c.id,
            name: c.name.clone(),
            max_sum_defect: defect,
            eps_kappa: e.is_finite().then_some(e),
            eps0: pou.eps0,
        })
        .collect();
    let text = json(&rows)?;
    m.add_artifact(out, "atlas.json", text.as_bytes())?;
    m.record("partition-sum", defect < PARTITION_TOLERANCE, format!("max |sum - 1| = {defect:e}"));
    Ok(text)
}

fn commutator_rate(cfg: &RunConfig, m: &mut RunManifest, out: Option<&Path>) -> Result<String, HarnessError> {
    let kind: CommutatorKind = cfg.kind.parse()?;
    let rough = cfg.manifold == "kink-1d";
    let name = if rough { "flat-torus-1d" } else { cfg.manifold.as_str() };
    let fx = cfx::by_name(name, cfg.resolution, rough)?;
    let table = run_study(kind, &fx, &cfg.eps_ladder)?;
    let csv = table.to_csv();
    m.add_artifact(out, &format!("rate_{}.csv", kind.label()), csv.as_bytes())?;
    let worst = table.norms().into_iter().fold(0.0, f64::max);
    let (pass, detail) = match kind {
        CommutatorKind::Decomposition => (worst <= DECOMPOSITION_TOLERANCE, format!("max defect {worst:e}")),
        _ if rough => (table.monotone, format!("monotone {}, slope {:.3}", table.monotone, table.slope)),
        CommutatorKind::SecondOrder => (table.slope >= 1.0, format!("slope {:.3}", table.slope)),
        _ => (table.monotone && table.slope >= 1.0, format!("monotone {}, slope {:.3}", table.monotone, table.slope)),
    };
    m.record(&format!("rate-{}", kind.label()), pass, detail);
    Ok(csv)
}

fn simulate(cfg: &RunConfig, m: &mut RunManifest, out: Option<&Path>) -> Result<String, HarnessError> {
    let sim = cfg.sim()?;
    let domain = sim.domain()?;
    let problem = sim.problem()?;
    let rho0 = domain.initial_density(&problem.geom);
    let driver = sim.driver(problem.coeffs.noises())?;
    let steps = sim.steps()?;
    let stride = steps.div_ceil(RECORD_ROWS).max(1);
    let runs = par_paths(sim.paths, |path| -> Result<_, SpdeError> {
        let inc = driver.increments(path);
        let mut rec = Recorder::new(&problem, stride);
        let summary = problem.run_path(&rho0, &inc, path, &mut [&mut rec])?;
        Ok((rec.to_csv(), summary))
    })?;
    let mut drift: f64 = 0.0;
    let mut sup: f64 = 0.0;
    for (path, (csv, s)) in runs.iter().enumerate() {
        m.add_artifact(out, &format!("path_{path:04}.csv"), csv.as_bytes())?;
        drift = drift.max(s.max_mass_drift);
        sup = sup.max(s.sup_energy);
    }
    let summary = SimulateSummary {
        paths: sim.paths,
        steps,
        resolution: sim.resolution,
        cbar: problem.coeffs.cbar(),
        energy0: problem.energy(&rho0.values),
        max_mass_drift_per_step: drift,
        max_sup_energy: sup,
    };
    let text = json(&summary)?;
    m.add_artifact(out, "summary.json", text.as_bytes())?;
    m.record("mass-drift", drift <= MASS_DRIFT_PER_STEP, format!("max per-step drift {drift:e}"));
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(check: Check) -> RunConfig {
        let mut c = RunConfig::new(check);
        c.seed = Some(1);
        c
    }

    #[test]
    fn atlas_check_on_torus() {
        let mut c = cfg(Check::AtlasCheck);
        c.manifold = "flat-torus-2d".into();
        c.resolution = Some(16);
        let r = run_experiment(&c).unwrap();
        assert!(r.manifest.passed());
        let v: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
        assert_eq!(v[0]["max_sum_defect"], 0.0);
        assert!(v[0]["eps_kappa"].is_null());
    }

    #[test]
    fn simulate_writes_paths_and_manifest() {
        let dir = std::env::temp_dir().join(format!("run-test-{}", std::process::id()));
        let mut c = cfg(Check::Simulate);
        c.resolution = Some(32);
        c.dt = 1e-4;
        c.horizon = 0.01;
        c.paths = 3;
        c.out = Some(dir.clone());
        let r = run_experiment(&c).unwrap();
        assert!(r.manifest.passed());
        assert_eq!(r.manifest.artifacts.len(), 4);
        let csv = std::fs::read_to_string(dir.join("path_0002.csv")).unwrap();
        assert!(csv.starts_with("t,mass,l2_energy\n"));
        assert_eq!(csv.lines().count(), 1 + 100 + 1);
        assert!(dir.join("manifest.json").exists());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn config_errors_surface() {
        let mut c = cfg(Check::Simulate);
        c.dt = 0.0;
        assert!(matches!(run_experiment(&c), Err(HarnessError::ConfigInvalid(_))));
        let mut c = cfg(Check::Simulate);
        c.dt = 0.5;
        c.horizon = 1.0;
        assert_eq!(run_experiment(&c).err().unwrap().exit_code(), 2);
    }
}
