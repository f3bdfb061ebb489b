//! Scores an icosphere against the unit sphere with all three protocols.

use gwrap::evalkit::{evaluate_mesh, EvalConfig, PointCloud, Protocol};
use gwrap::fixtures::{make_fixture, FixtureKind, FixtureParams};
use gwrap::math::fibonacci_sphere;
use gwrap::mesh::icosphere;
use gwrap::Vec3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mesh = icosphere(Vec3::zeros(), 1.0, 4);
    let gt = PointCloud::new(fibonacci_sphere(100_000), None)?;
    let cameras = make_fixture(FixtureKind::SphereShell, &FixtureParams { cameras: 12, ..Default::default() })?.cameras;
    let config = EvalConfig {
        uniform_count: 200_000,
        tau: Some(0.005),
        ..Default::default()
    };
    for protocol in [Protocol::Legacy, Protocol::Uniform, Protocol::VirtualScan] {
        let r = evaluate_mesh(&mesh, &gt, protocol, &cameras, &config)?;
        println!(
            "{protocol:?}: {} points, precision {:.4}, recall {:.4}, F1 {:.4}, chamfer {:.5}",
            r.pred_points, r.precision, r.recall, r.f1, r.chamfer
        );
    }
    Ok(())
}
