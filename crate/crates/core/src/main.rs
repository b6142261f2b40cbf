use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use chartflow::harness::{emit_plots, run_experiment, Check, HarnessError, RunConfig, EXIT_FAIL, EXIT_PASS};

#[derive(Parser)]
#[command(name = "chartflow", version, about = "Chart-based checks for stochastic continuity equations")]
struct Cli {
    /// Worker threads for path-parallel runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Space {
    /// Fixture name or atlas file.
    #[arg(long, default_value = "flat-torus-1d")]
    manifold: String,
    /// Nodes per chart axis.
    #[arg(long)]
    resolution: Option<usize>,
}

#[derive(Args)]
struct Sim {
    #[command(flatten)]
    space: Space,
    /// Time step, model units.
    #[arg(long)]
    dt: Option<f64>,
    /// Horizon, model units.
    #[arg(long = "T", visible_alias = "t-final")]
    t_final: Option<f64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    coeff_preset: Option<String>,
    /// Directory for artifacts and the manifest.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Partition-of-unity sums and localization radii per chart.
    AtlasCheck {
        #[command(flatten)]
        space: Space,
        #[arg(long)]
        margin: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// L2 norm of one commutator along an epsilon ladder, as CSV.
    CommutatorRate {
        #[command(flatten)]
        space: Space,
        #[arg(long)]
        kind: String,
        /// Comma-separated epsilons.
        #[arg(long)]
        eps_ladder: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo paths with mass and energy trajectories.
    Simulate(Sim),
    /// Weak-form residual of the renormalized equation.
    RenormCheck {
        #[command(flatten)]
        sim: Sim,
        /// linear | quadratic-trunc:MU | custom-spline FILE
        #[arg(long = "F", num_args = 1..=2, default_value = "linear")]
        f: Vec<String>,
        /// one | fourier:K
        #[arg(long, default_value = "one")]
        psi: String,
    },
    /// Energy bound E sup <= E0 exp(Cbar T).
    Apriori(Sim),
    /// Zero data stays zero; solutions differ by a solution.
    Uniqueness(Sim),
    /// Run a flat key = value config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write plot scripts for the CSVs in a run directory.
    EmitPlots { dir: PathBuf },
}

fn put<T: ToString>(cfg: &mut RunConfig, key: &str, v: Option<T>) -> Result<(), HarnessError> {
    match v {
        Some(v) => cfg.set(key, &v.to_string()),
        None => Ok(()),
    }
}

fn space(cfg: &mut RunConfig, s: Space) -> Result<(), HarnessError> {
    cfg.set("manifold", &s.manifold)?;
    put(cfg, "resolution", s.resolution)
}

fn sim(check: Check, s: Sim) -> Result<RunConfig, HarnessError> {
    let mut cfg = RunConfig::new(check);
    space(&mut cfg, s.space)?;
    put(&mut cfg, "dt_model", s.dt)?;
    put(&mut cfg, "t_final_model", s.t_final)?;
    put(&mut cfg, "paths", s.paths)?;
    put(&mut cfg, "seed", s.seed)?;
    put(&mut cfg, "coeff_preset", s.coeff_preset)?;
    put(&mut cfg, "out", s.out.map(|p| p.display().to_string()))?;
    Ok(cfg)
}

fn config(cmd: Cmd) -> Result<Option<RunConfig>, HarnessError> {
    Ok(Some(match cmd {
        Cmd::AtlasCheck { space: s, margin, out } => {
            let mut cfg = RunConfig::new(Check::AtlasCheck);
            space(&mut cfg, s)?;
            put(&mut cfg, "margin_model", margin)?;
            cfg.out = out;
            cfg
        }
        Cmd::CommutatorRate { space: s, kind, eps_ladder, out } => {
            let mut cfg = RunConfig::new(Check::CommutatorRate);
            space(&mut cfg, s)?;
            cfg.set("kind", &kind)?;
            put(&mut cfg, "eps_ladder_model", eps_ladder)?;
            cfg.out = out;
            cfg
        }
        Cmd::Simulate(s) => sim(Check::Simulate, s)?,
        Cmd::RenormCheck { sim: s, f, psi } => {
            let mut cfg = sim(Check::RenormCheck, s)?;
            cfg.set("F", &f.join(" "))?;
            cfg.set("psi", &psi)?;
            cfg
        }
        Cmd::Apriori(s) => sim(Check::Apriori, s)?,
        Cmd::Uniqueness(s) => sim(Check::Uniqueness, s)?,
        Cmd::Run { config, out } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|source| HarnessError::Io { path: config.display().to_string(), source })?;
            let mut cfg = RunConfig::parse(&text)?;
            if out.is_some() {
                cfg.out = out;
            }
            cfg
        }
        Cmd::EmitPlots { dir } => {
            for p in emit_plots(&dir)? {
                println!("{}", p.display());
            }
            return Ok(None);
        }
    }))
}

fn exec(cli: Cli) -> Result<i32, HarnessError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| HarnessError::ConfigInvalid(format!("threads: {e}")))?;
    }
    let Some(cfg) = config(cli.cmd)? else { return Ok(EXIT_PASS) };
    let outcome = run_experiment(&cfg)?;
    print!("{}", outcome.stdout);
    let failed: Vec<_> = outcome.manifest.checks.iter().filter(|c| !c.pass).collect();
    for c in &failed {
        eprintln!("FAIL {}: {}", c.name, c.detail);
    }
    Ok(if failed.is_empty() { EXIT_PASS } else { EXIT_FAIL })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = exec(cli).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
