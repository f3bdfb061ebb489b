//! Subdivides an extracted mesh 1-to-4 and shows that the legacy score
//! moves while the uniform score does not.

use gwrap::evalkit::{bias_experiment, PointCloud};
use gwrap::fixtures::{make_fixture, FixtureKind, FixtureParams};
use gwrap::math::fibonacci_sphere;
use gwrap::meshing::{mesh_mtet, MtetConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = FixtureParams {
        count: 2000,
        tangent_scale: 0.5,
        ..Default::default()
    };
    let scene = make_fixture(FixtureKind::SphereShell, &params)?;
    let mesh = mesh_mtet(&scene, &MtetConfig::default())?;
    let gt = PointCloud::new(fibonacci_sphere(100_000), None)?;
    let r = bias_experiment(&mesh, &gt, 0.015, 200_000, 1)?;
    println!("tau {}", r.tau);
    println!(
        "legacy  {:.4} -> {:.4} ({} -> {} points)",
        r.legacy_before.f1, r.legacy_after.f1, r.legacy_before.pred_points, r.legacy_after.pred_points
    );
    println!("uniform {:.4} -> {:.4}", r.uniform_before.f1, r.uniform_after.f1);
    println!("uniform stable: {}", r.uniform_stable);
    Ok(())
}
