use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gwrap::math::fibonacci_sphere;

const CONFIG: &str = "
[wrap]
iterations = 15
views_per_step = 2

[eval]
uniform_count = 50000
";

fn gwrap(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gwrap"))
        .current_dir(dir)
        .args(["--config", "run.toml"])
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = gwrap(dir, args);
    assert!(
        out.status.success(),
        "gwrap {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
    dir
}

#[test]
fn sphere_pipeline_scores_well() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["fixture", "--kind", "sphere_shell", "--params", "count=1500,tangent_scale=0.5,cameras=8,resolution=24", "--out", "scene.txt"]);
    ok(d, &["wrap", "--scene", "scene.txt", "--out", "wrapped.txt"]);
    assert!(d.join("wrapped.csv").exists());
    ok(d, &["mesh", "mtet", "--scene", "wrapped.txt", "--out", "mesh.ply"]);
    gwrap::io::save_points(&fibonacci_sphere(50_000), d.join("gt.ply")).unwrap();
    let out = ok(d, &["eval", "uniform", "--pred", "mesh.ply", "--gt", "gt.ply"]);
    let result: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let f1 = result["f1"].as_f64().unwrap();
    assert!(f1 >= 0.95, "f1 {f1}");
    assert_eq!(result["protocol"], "uniform");
}

#[test]
fn equivalence_check_passes_on_sparse_scene() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["fixture", "--kind", "plane_patch", "--params", "count=2,size=1,tangent_scale=0.05,normal_scale=0.05", "--out", "sparse.txt"]);
    let out = ok(d, &["verify", "equivalence", "--scene", "sparse.txt", "--rays", "100"]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(report["max_error"].as_f64().unwrap() < 5e-3);
}

#[test]
fn errors_map_to_exit_codes() {
    let dir = workspace();
    let d = dir.path();
    assert_eq!(gwrap(d, &["transmogrify"]).status.code(), Some(2));
    let missing = gwrap(d, &["wrap", "--scene", "nope.txt", "--out", "x.txt"]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error[io]"));
    fs::write(d.join("bad.txt"), "gwrap-scene 9\n").unwrap();
    assert_eq!(gwrap(d, &["wrap", "--scene", "bad.txt", "--out", "x.txt"]).status.code(), Some(4));
    assert_eq!(gwrap(d, &["fixture", "--kind", "torus", "--out", "t.txt"]).status.code(), Some(10));
}

#[test]
fn seeded_runs_are_reproducible() {
    let dir = workspace();
    let d = dir.path();
    ok(d, &["fixture", "--kind", "sphere_shell", "--params", "count=120,cameras=6,resolution=16", "--out", "s.txt"]);
    for out in ["a.txt", "b.txt"] {
        ok(d, &["--seed", "9", "wrap", "--scene", "s.txt", "--out", out]);
    }
    assert_eq!(fs::read(d.join("a.txt")).unwrap(), fs::read(d.join("b.txt")).unwrap());
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("b.csv")).unwrap());
}

#[test]
fn config_dump_round_trips() {
    let dir = workspace();
    let d = dir.path();
    let first = ok(d, &["config"]).stdout;
    fs::write(d.join("dumped.toml"), &first).unwrap();
    let second = Command::new(env!("CARGO_BIN_EXE_gwrap"))
        .args(["--config", d.join("dumped.toml").to_str().unwrap(), "config"])
        .output()
        .unwrap();
    assert!(second.status.success());
    assert_eq!(first, second.stdout);
}
