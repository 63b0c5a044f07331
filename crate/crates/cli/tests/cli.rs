use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_vastop"))
}

fn bundled(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("examples").join(name)
}

fn run(config: &Path, out: &Path, extra: &[&str]) -> Output {
    bin()
        .arg("run")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn summary(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap()
}

/// Writes `cfg` to a file inside `dir` and returns its path.
fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn small_config() -> Value {
    serde_json::json!({
        "scenario": {
            "market": {"r": 0.03, "sigma": 0.2},
            "contract": {"G": 100.0, "T": 15.0, "F0": 100.0},
            "fee": {"kind": "piecewise", "breakpoints": [10.0], "rates": [0.010908, 0.005454]},
            "charge": {"kind": "exponential", "kappa": 0.0055}
        },
        "tasks": ["check-L", "price-lattice", "decompose", "mc-verify", "paper-fig"],
        "grid": {"N": 60, "M": 101},
        "lattice": {"n_seq": [30, 60, 120]},
        "mc": {"npaths": 2000}
    })
}

#[test]
fn trivial_config_reports_an_empty_region() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&bundled("trivial_kc.json"), dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let s = summary(dir.path());
    for solver in ["lattice", "pde"] {
        assert_eq!(s["results"]["regions"][solver]["surrender_nodes"], 0);
        assert_eq!(s["results"]["regions"][solver]["empty"], true);
    }
    for task in ["price-lattice", "price-pde"] {
        let rel = s["results"][task]["max_rel_v_minus_h"].as_f64().unwrap();
        assert!(rel <= 2e-3, "{task}: {rel}");
    }
}

#[test]
fn c1_regions_are_empty_exactly_between_years_5_and_10() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(bundled("paper_sec5_c1.json")).unwrap();
    let mut cfg: Value = serde_json::from_str(&text).unwrap();
    // The bundled plan also runs a million paths; the region check needs
    // only the solvers.
    cfg["tasks"] = serde_json::json!(["price-lattice", "price-pde", "regions"]);
    let config = write_config(dir.path(), &cfg);
    let out = run(&config, dir.path(), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for solver in ["lattice", "pde"] {
        let csv = fs::read_to_string(dir.path().join(format!("regions_{solver}.csv"))).unwrap();
        let mut nonempty = std::collections::BTreeMap::<String, bool>::new();
        for line in csv.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            *nonempty.entry(cols[0].to_string()).or_default() |= cols[2] == "1";
        }
        for (t, any) in &nonempty {
            let t: f64 = t.parse().unwrap();
            if t >= 15.0 {
                continue;
            }
            assert_eq!(!any, t > 5.0 + 1e-9 && t <= 10.0 + 1e-9, "{solver}: slice t = {t}");
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = run(&config, out, &["--seed", "7"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(&a)
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 10, "{names:?}");
    for name in names {
        let (x, y) = (fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap());
        if name == "summary.json" {
            // The echoed output directory differs between the two runs.
            let (mut x, mut y) = (summary(&a), summary(&b));
            x["config"]["out"] = Value::Null;
            y["config"]["out"] = Value::Null;
            assert_eq!(x, y);
        } else {
            assert!(x == y, "{name:?} differs");
        }
    }
}

#[test]
fn summary_echoes_the_resolved_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    let o = run(&config, dir.path(), &["--seed", "11", "--grid-N", "120"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cfg = &summary(dir.path())["config"];
    assert_eq!(cfg["mc"]["seed"], 11);
    assert_eq!(cfg["mc"]["scheme"], "exact-lognormal");
    assert_eq!(cfg["grid"]["N"], 120);
    assert_eq!(cfg["grid"]["xmax_mult"], 8.0);
    assert_eq!(cfg["pde"]["psor"]["max_iter"], 10_000);
    assert_eq!(cfg["region"]["abs"], 0.0);
    assert_eq!(cfg["decompose"]["tolerance"], 0.5);
    let tasks: Vec<&str> = cfg["tasks"].as_array().unwrap().iter().map(|t| t.as_str().unwrap()).collect();
    assert_eq!(
        tasks,
        ["check-L", "price-lattice", "regions", "boundary", "decompose", "mc-verify", "paper-fig"]
    );
    for panel in ["c1_disc", "c1_cont", "c2_disc", "c2_cont"] {
        assert!(dir.path().join(format!("paper_fig_{panel}.csv")).exists());
    }
    let mc = fs::read_to_string(dir.path().join("mc_estimates.csv")).unwrap();
    assert!(mc.starts_with("quantity,estimate,std_error,npaths,seed\n"));
}

#[test]
fn missing_sigma_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config();
    cfg["scenario"]["market"].as_object_mut().unwrap().remove("sigma");
    let config = write_config(dir.path(), &cfg);
    let o = run(&config, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("scenario.market.sigma"), "{err}");
}

#[test]
fn invalid_inputs_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config();
    cfg["tasks"] = serde_json::json!(["price-everything"]);
    let o = run(&write_config(dir.path(), &cfg), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("tasks"));

    // The fee jumps at year 10, which 7 steps over 15 years miss.
    let config = write_config(dir.path(), &small_config());
    let o = run(&config, &dir.path().join("out"), &["--grid-N", "7"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("grid.N"));

    let o = bin()
        .arg("run")
        .arg(&config)
        .arg("--out")
        .arg(dir.path().join("out"))
        .env("VASTOP_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config();
    cfg["tasks"] = serde_json::json!(["price-pde"]);
    cfg["pde"] = serde_json::json!({"psor": {"omega": 1.5, "tol": 1e-14, "max_iter": 1}});
    let o = run(&write_config(dir.path(), &cfg), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("price-pde"));
}

#[test]
fn thread_cap_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), &small_config());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for (out, threads) in [(&a, "1"), (&b, "3")] {
        let o = bin()
            .arg("run")
            .arg(&config)
            .arg("--out")
            .arg(out)
            .env("VASTOP_THREADS", threads)
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for name in ["mc_estimates.csv", "lattice_surface.csv", "decomposition.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}
