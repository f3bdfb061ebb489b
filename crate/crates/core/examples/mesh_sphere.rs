//! Extracts the sphere shell with both meshers and writes them as PLY.
//!
//! cargo run --release --example mesh_sphere -- [out_dir]

use std::time::Instant;

use gwrap::fixtures::{make_fixture, FixtureKind, FixtureParams};
use gwrap::io::save_mesh;
use gwrap::mesh::watertight_check;
use gwrap::meshing::{mesh_mtet, mesh_pam, MtetConfig, PamConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "mesh_sphere".into()));
    std::fs::create_dir_all(&out)?;
    let params = FixtureParams {
        count: 2000,
        tangent_scale: 0.5,
        ..Default::default()
    };
    let scene = make_fixture(FixtureKind::SphereShell, &params)?;

    let t = Instant::now();
    let mtet = mesh_mtet(&scene, &MtetConfig::default())?;
    report("mtet", &mtet, t.elapsed().as_secs_f64());
    save_mesh(&mtet, out.join("mtet.ply"))?;

    let t = Instant::now();
    let pam = mesh_pam(&scene, &PamConfig { samples: 10_000, ..Default::default() })?;
    report("pam", &pam, t.elapsed().as_secs_f64());
    save_mesh(&pam, out.join("pam.ply"))?;
    Ok(())
}

fn report(name: &str, mesh: &gwrap::TriangleMesh, secs: f64) {
    let w = watertight_check(mesh);
    let r = mesh.vertices.iter().map(|v| v.norm()).sum::<f64>() / mesh.vertices.len() as f64;
    println!(
        "{name}: {} faces, mean radius {r:.4}, edge {:.4}, closed manifold {}, {secs:.1}s",
        mesh.faces.len(),
        mesh.mean_edge_length(),
        w.is_closed_manifold
    );
}
