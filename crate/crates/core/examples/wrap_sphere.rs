//! Scrambles the normals of the sphere shell and lets the alignment loss
//! turn them back outward.

use gwrap::fixtures::{make_fixture, randomize_orientations, FixtureKind, FixtureParams};
use gwrap::wrap::{optimize_normals, visible_gaussians, WrapConfig};
use gwrap::GaussianScene;

fn outward(scene: &GaussianScene, visible: &[bool]) -> f64 {
    let (ok, n) = scene
        .gaussians()
        .iter()
        .zip(visible)
        .filter(|(_, v)| **v)
        .fold((0, 0), |(ok, n), (g, _)| (ok + (g.oriented_normal().dot(&g.mean) > 0.0) as usize, n + 1));
    ok as f64 / n as f64
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = FixtureParams {
        count: 400,
        tangent_scale: 0.5,
        ..Default::default()
    };
    let mut scene = make_fixture(FixtureKind::SphereShell, &params)?;
    randomize_orientations(&mut scene, 1.0, 7);
    let config = WrapConfig::default();
    let visible = visible_gaussians(&scene, &config.render, config.min_weight);
    println!("outward before: {:.1}%", 100.0 * outward(&scene, &visible));
    let (wrapped, report) = optimize_normals(scene, &config)?;
    for (i, l) in report.loss_trace.iter().enumerate().step_by(25) {
        println!("iteration {i:>4}: loss {l:.4}");
    }
    println!(
        "outward after: {:.1}%, {} clones added",
        100.0 * outward(&wrapped, &visible[..]),
        report.total_clones()
    );
    Ok(())
}
