//! Plot scripts for run directories. Nothing is rendered here: each script is a small
//! matplotlib program next to the CSVs it reads.
//!
//! Rate CSVs (`kind,eps,l2_norm,slope_so_far`) get one log-log script per kind with a
//! reference line of slope 1. Trajectory CSVs (`t,mass,l2_energy`) and report energy
//! CSVs (`t,mean_l2_energy,bound`) get a script drawing energy against `E₀ e^{C̄t}`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use super::{write_atomic, HarnessError};

const RATE_HEADER: &str = "kind,eps,l2_norm,slope_so_far";
const PATH_HEADER: &str = "t,mass,l2_energy";
const REPORT_HEADER: &str = "t,mean_l2_energy,bound";

fn rate_script(kind: &str, files: &[String]) -> String {
    format!(
        r#"import csv
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

files = {files:?}
eps, norm = [], []
for name in files:
    with open(name) as fh:
        for row in csv.DictReader(fh):
            if row["kind"] == "{kind}":
                eps.append(float(row["eps"]))
                norm.append(float(row["l2_norm"]))
pairs = sorted(zip(eps, norm))
eps, norm = [p[0] for p in pairs], [p[1] for p in pairs]
fig, ax = plt.subplots()
ax.loglog(eps, norm, "o-", label="{kind}")
ax.loglog(eps, [norm[-1] * e / eps[-1] for e in eps], "k--", label="slope 1")
ax.set_xlabel("eps")
ax.set_ylabel("L2 norm")
ax.legend()
fig.savefig("rate_{kind}.png", dpi=150)
"#
    )
}

fn energy_script(paths: &[String], reports: &[String]) -> String {
    format!(
        r#"import csv, json, math, os
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

paths = {paths:?}
reports = {reports:?}
fig, ax = plt.subplots()
cbar = None
if os.path.exists("summary.json"):
    cbar = json.load(open("summary.json"))["cbar"]
for name in paths:
    rows = list(csv.DictReader(open(name)))
    t = [float(r["t"]) for r in rows]
    e = [float(r["l2_energy"]) for r in rows]
    ax.plot(t, e, color="0.6", lw=0.7)
    if cbar is not None:
        ax.plot(t, [e[0] * math.exp(cbar * s) for s in t], "r--", lw=0.7)
for name in reports:
    rows = list(csv.DictReader(open(name)))
    t = [float(r["t"]) for r in rows]
    ax.plot(t, [float(r["mean_l2_energy"]) for r in rows], "b-", label="mean energy")
    ax.plot(t, [float(r["bound"]) for r in rows], "r--", label="bound")
ax.set_xlabel("t")
ax.set_ylabel("L2 energy")
if reports:
    ax.legend()
fig.savefig("energy.png", dpi=150)
"#
    )
}

fn read(path: &Path) -> Result<String, HarnessError> {
    fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.display().to_string(), source })
}

/// Write plot scripts for every recognised CSV in `dir`; returns the scripts written.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    let io = |source| HarnessError::Io { path: dir.display().to_string(), source };
    let mut csvs: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    csvs.sort();

    let mut rates: Vec<(String, BTreeSet<String>)> = Vec::new();
    let mut paths = Vec::new();
    let mut reports = Vec::new();
    for p in &csvs {
        let text = read(p)?;
        let name = p.file_name().unwrap().to_string_lossy().into_owned();
        match text.lines().next().unwrap_or("") {
            RATE_HEADER => {
                let kinds: BTreeSet<String> =
                    text.lines().skip(1).filter_map(|l| l.split(',').next()).map(str::to_string).collect();
                rates.push((name, kinds));
            }
            PATH_HEADER => paths.push(name),
            REPORT_HEADER => reports.push(name),
            _ => {}
        }
    }

    let kinds: BTreeSet<&String> = rates.iter().flat_map(|(_, k)| k).collect();
    let mut written = Vec::new();
    for kind in kinds {
        let files: Vec<String> = rates.iter().filter(|(_, k)| k.contains(kind)).map(|(f, _)| f.clone()).collect();
        let out = dir.join(format!("plot_rate_{kind}.py"));
        write_atomic(&out, rate_script(kind, &files).as_bytes())?;
        written.push(out);
    }
    if !paths.is_empty() || !reports.is_empty() {
        let out = dir.join("plot_energy.py");
        write_atomic(&out, energy_script(&paths, &reports).as_bytes())?;
        written.push(out);
    }
    if written.is_empty() {
        return Err(HarnessError::MissingArtifacts(dir.to_path_buf()));
    }
    Ok(written)
}
