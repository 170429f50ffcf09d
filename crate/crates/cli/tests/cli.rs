use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bdie"))
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("bdie-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str], config: Option<&str>, dir: &Path) -> (i32, String) {
    let mut cmd = bin();
    if let Some(text) = config {
        let path = dir.join("run.toml");
        std::fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(path);
    }
    let out = cmd.args(args).arg("--out").arg(dir.join("out")).output().unwrap();
    let text = String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr);
    (out.status.code().unwrap_or(-1), text)
}

fn summary(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("out/summary.json")).unwrap()).unwrap()
}

fn find_f64(v: &Value, key: &str) -> Option<f64> {
    match v {
        Value::Object(m) => m.get(key).and_then(Value::as_f64).or_else(|| m.values().find_map(|x| find_f64(x, key))),
        Value::Array(a) => a.iter().find_map(|x| find_f64(x, key)),
        _ => None,
    }
}

#[test]
fn solve_laplace_dipole() {
    let dir = scratch("solve");
    let (code, text) = run(&["solve"], Some("[discretization]\nn = 64\nh = 0.1\n"), &dir);
    assert_eq!(code, 0, "{text}");
    let s = summary(&dir);
    assert_eq!(s["command"], "solve");
    assert_eq!(s["config"]["discretization"]["n"], 64);
    let err = find_f64(&s, "psi_relative").expect("psi error in summary");
    assert!(err < 1e-6, "{err}");
    let csv = std::fs::read_to_string(dir.join("out/solution_boundary.csv")).unwrap();
    assert!(csv.starts_with("x,y,psi"));
    assert_eq!(csv.lines().count(), 65);
}

#[test]
fn truncation_inside_curve_is_a_geometry_error() {
    let dir = scratch("geom");
    let (code, text) = run(&["solve"], Some("[discretization]\nr_trunc = 0.9\n"), &dir);
    assert_eq!(code, 2, "{text}");
    assert!(text.contains("geometry"));
}

#[test]
fn malformed_and_unknown_config_exit_2() {
    let dir = scratch("parse");
    assert_eq!(run(&["solve"], Some("n = [\n"), &dir).0, 2);
    assert_eq!(run(&["solve"], Some("[discretization]\nnodes = 64\n"), &dir).0, 2);
    assert_eq!(run(&["solve"], Some("[data]\ncase = \"no-such-case\"\n"), &dir).0, 2);
}

#[test]
fn missing_config_file_exits_2() {
    let dir = scratch("missing");
    let (code, _) = run(&["solve", "--config", dir.join("absent.toml").to_str().unwrap()], None, &dir);
    assert_eq!(code, 2);
}

#[test]
fn incompatible_source_exits_3() {
    let dir = scratch("compat");
    let cfg = "[data]\nsource = \"gaussian\"\ndirichlet = \"cos\"\n[discretization]\nn = 32\nh = 0.2\n";
    let (code, text) = run(&["solve"], Some(cfg), &dir);
    assert_eq!(code, 3, "{text}");
}

#[test]
fn constant_coefficient_has_no_remainder() {
    let dir = scratch("remainder");
    let cfg = "[data]\nsource = \"zero\"\ndirichlet = \"cos3\"\n[coefficient]\nkind = \"constant\"\nvalue = 2.0\n\
               [discretization]\nn = 64\nh = 0.1\n";
    let (code, text) = run(&["verify"], Some(cfg), &dir);
    assert_eq!(code, 0, "{text}");
    let line = text.lines().find(|l| l.starts_with("remainder block max")).expect(&text);
    let value: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(value <= 1e-12, "{line}");
}

#[test]
fn selftest_and_flipped_normal_control() {
    let dir = scratch("selftest");
    let (code, text) = run(&["selftest"], None, &dir);
    assert_eq!(code, 0, "{text}");
    assert!(dir.join("out/selftest.csv").exists());
    let (code, text) = run(&["selftest", "--flip-normals"], None, &dir);
    assert_ne!(code, 0, "{text}");
    assert!(text.contains("FAIL"));
}

#[test]
fn conditioning_csv_schema() {
    let dir = scratch("cond");
    let cfg = "[data]\ncase = \"bump-dipole\"\n[conditioning]\nns = [16, 32]\nh = 0.3\n";
    let (code, text) = run(&["conditioning"], Some(cfg), &dir);
    assert_eq!(code, 0, "{text}");
    let csv = std::fs::read_to_string(dir.join("out/conditioning.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("N,cond_M,sigma_min_V"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn convergence_csv_schema() {
    let dir = scratch("conv");
    let cfg = "[data]\ncase = \"bump-dipole\"\n[convergence]\nlevels = [{ n = 16, h = 0.4 }, { n = 32, h = 0.2 }]\nmin_order = 0.0\n";
    let (code, text) = run(&["convergence"], Some(cfg), &dir);
    assert_eq!(code, 0, "{text}");
    let csv = std::fs::read_to_string(dir.join("out/convergence.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("N,h,err_u,err_psi,order"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn runs_are_deterministic() {
    let cfg = "seed = 7\n[data]\ncase = \"bump-dipole\"\n[discretization]\nn = 32\nh = 0.2\n";
    let a = scratch("det-a");
    let b = scratch("det-b");
    std::fs::write(a.join("run.toml"), cfg).unwrap();
    for dir in [&a, &b] {
        let status = bin()
            .args(["--config", a.join("run.toml").to_str().unwrap(), "--out"])
            .arg(a.join("out"))
            .arg("solve")
            .status()
            .unwrap();
        assert!(status.success());
        let _ = std::fs::rename(a.join("out"), dir.join("kept"));
    }
    for f in ["summary.json", "solution_domain.csv", "solution_boundary.csv"] {
        let x = std::fs::read(a.join("kept").join(f)).unwrap();
        let y = std::fs::read(b.join("kept").join(f)).unwrap();
        assert!(x == y, "{f} differs between runs");
    }
}
