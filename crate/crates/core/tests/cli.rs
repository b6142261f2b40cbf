use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chartflow"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn scratch(tag: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("cli-{tag}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    fs::create_dir_all(&d).unwrap();
    d
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

const SIM: [&str; 10] = ["--resolution", "32", "--dt", "1e-4", "--T", "0.01", "--paths", "3", "--seed", "11"];

#[test]
fn atlas_check_emits_one_record_per_chart() {
    let o = run(&["atlas-check", "--manifold", "sphere", "--resolution", "24", "--margin", "0.2"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let charts = v.as_array().unwrap();
    assert_eq!(charts.len(), 2);
    for c in charts {
        for key in ["chart", "max_sum_defect", "eps_kappa", "eps0"] {
            assert!(c.get(key).is_some(), "{key} missing");
        }
        assert!(c["max_sum_defect"].as_f64().unwrap() < 1e-12);
    }
}

#[test]
fn commutator_rate_csv() {
    let o = run(&["commutator-rate", "--kind", "r", "--manifold", "flat-torus-1d", "--resolution", "512"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("kind,eps,l2_norm,slope_so_far"));
    assert_eq!(lines.count(), 5);
}

#[test]
fn simulate_is_deterministic_and_thread_independent() {
    let (a, b) = (scratch("sim-a"), scratch("sim-b"));
    let mut args = vec!["simulate"];
    args.extend(SIM);
    let oa = bin().args(&args).args(["--out", a.to_str().unwrap(), "--threads", "1"]).output().unwrap();
    let ob = bin().args(&args).args(["--out", b.to_str().unwrap(), "--threads", "3"]).output().unwrap();
    assert_eq!(code(&oa), 0, "{}", String::from_utf8_lossy(&oa.stderr));
    assert_eq!(code(&ob), 0);
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma["content_hash"], mb["content_hash"]);
    for p in ["path_0000.csv", "path_0001.csv", "path_0002.csv"] {
        assert_eq!(fs::read(a.join(p)).unwrap(), fs::read(b.join(p)).unwrap());
    }
    assert_eq!(ma["artifacts"].as_array().unwrap().len(), 4);
    fs::remove_dir_all(&a).unwrap();
    fs::remove_dir_all(&b).unwrap();
}

#[test]
fn seeds_change_the_hash() {
    let (a, b) = (scratch("seed-a"), scratch("seed-b"));
    let mut args = vec!["simulate"];
    args.extend(SIM);
    bin().args(&args).args(["--out", a.to_str().unwrap()]).output().unwrap();
    args[10] = "12";
    bin().args(&args).args(["--out", b.to_str().unwrap()]).output().unwrap();
    assert_ne!(manifest(&a)["content_hash"], manifest(&b)["content_hash"]);
    fs::remove_dir_all(&a).unwrap();
    fs::remove_dir_all(&b).unwrap();
}

#[test]
fn config_errors_exit_2() {
    // missing seed
    assert_eq!(code(&run(&["simulate", "--dt", "1e-5", "--T", "0.01"])), 2);
    // unstable step
    assert_eq!(code(&run(&["simulate", "--dt", "0.1", "--T", "1", "--seed", "1"])), 2);
    assert_eq!(code(&run(&["simulate", "--dt", "-1e-5", "--T", "1", "--seed", "1"])), 2);
    assert_eq!(code(&run(&["commutator-rate", "--kind", "q"])), 2);
    assert_eq!(code(&run(&["renorm-check", "--F", "cubic", "--seed", "1"])), 2);
    assert_eq!(code(&run(&["apriori", "--paths", "8", "--seed", "1", "--dt", "1e-5", "--T", "0.001"])), 2);
    let d = scratch("cfg");
    fs::write(d.join("run.cfg"), "check = simulate\nseed = 1\ndt_seconds = 1e-5\n").unwrap();
    let o = run(&["run", "--config", d.join("run.cfg").to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("_model"));
    fs::remove_dir_all(&d).unwrap();
}

#[test]
fn property_failures_exit_1() {
    let d = scratch("spline");
    fs::write(d.join("narrow.txt"), "knots = -1, 0, 1\nvalues = 1, 0, 1\n").unwrap();
    let spec = format!("custom-spline:{}", d.join("narrow.txt").display());
    let mut args = vec!["renorm-check", "--F", &spec];
    args.extend(SIM);
    let o = run(&args);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("certified range"));
    fs::remove_dir_all(&d).unwrap();
}

#[test]
fn config_file_matches_flags() {
    let (a, b) = (scratch("run-a"), scratch("run-b"));
    fs::write(
        a.join("run.cfg"),
        "check = simulate\nresolution = 32\ndt_model = 1e-4\nt_final_model = 0.01\npaths = 3\nseed = 11\n",
    )
    .unwrap();
    let o = run(&["run", "--config", a.join("run.cfg").to_str().unwrap(), "--out", a.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mut args = vec!["simulate"];
    args.extend(SIM);
    bin().args(&args).args(["--out", b.to_str().unwrap()]).output().unwrap();
    assert_eq!(manifest(&a)["content_hash"], manifest(&b)["content_hash"]);
    fs::remove_dir_all(&a).unwrap();
    fs::remove_dir_all(&b).unwrap();
}

#[test]
fn emit_plots_scripts_only() {
    let d = scratch("plots");
    assert_eq!(code(&run(&["emit-plots", d.to_str().unwrap()])), 2);
    let o = run(&["commutator-rate", "--kind", "c2", "--manifold", "flat-torus-2d", "--resolution", "64", "--out", d.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let mut args = vec!["simulate"];
    args.extend(SIM);
    bin().args(&args).args(["--out", d.to_str().unwrap()]).output().unwrap();
    let o = run(&["emit-plots", d.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let listed = String::from_utf8(o.stdout).unwrap();
    assert!(listed.contains("plot_rate_c2.py") && listed.contains("plot_energy.py"));
    let pngs = fs::read_dir(&d).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png"));
    assert_eq!(pngs.count(), 0);
    fs::remove_dir_all(&d).unwrap();
}
