//! Compares alpha compositing with ray marching on a sparse scene of
//! well-separated Gaussians.

use gwrap::fixtures::{make_fixture, FixtureKind, FixtureParams};
use gwrap::render::{equivalence_check, RenderConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let params = FixtureParams {
        count: 2,
        tangent_scale: 0.08,
        normal_scale: 0.05,
        ..Default::default()
    };
    let scene = make_fixture(FixtureKind::CubeShell, &params)?;
    println!("{} Gaussians, max scale {:.3}", scene.len(), scene.max_scale());
    let report = equivalence_check(&scene, 500, 1, &RenderConfig::default());
    println!(
        "{} rays, step {:.2e}: max error {:.2e}, mean {:.2e}",
        report.rays, report.step, report.max_error, report.mean_error
    );
    Ok(())
}
