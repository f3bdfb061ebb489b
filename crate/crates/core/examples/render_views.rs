//! Renders color, depth and normal maps of the sphere-shell fixture from
//! its first camera and writes them as PNGs.
//!
//! cargo run --release --example render_views -- [out_dir]

use gwrap::fixtures::{make_fixture, FixtureKind, FixtureParams};
use gwrap::io::write_png;
use gwrap::render::{depth_to_pseudo_normals, normal_alignment_loss, render_maps, RenderConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "render_views".into()));
    std::fs::create_dir_all(&out)?;
    let params = FixtureParams {
        count: 800,
        cameras: 4,
        resolution: 128,
        tangent_scale: 0.5,
        ..Default::default()
    };
    let scene = make_fixture(FixtureKind::SphereShell, &params)?;
    let camera = &scene.cameras[0];
    let config = RenderConfig::default();
    let maps = render_maps(&scene, camera, &config);
    let pseudo = depth_to_pseudo_normals(&maps.depth, camera);

    let depths = maps.depth.data.iter().copied().filter(|d| d.is_finite());
    let (lo, hi) = depths.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), d| (a.min(d), b.max(d)));
    write_png(&maps.color, 0.0, 1.0, out.join("color.png"))?;
    write_png(&maps.depth, lo, hi, out.join("depth.png"))?;
    write_png(&maps.normal, -1.0, 1.0, out.join("normal.png"))?;
    write_png(&pseudo, -1.0, 1.0, out.join("pseudo_normal.png"))?;

    let loss = normal_alignment_loss(&scene, camera, &config);
    println!("depth range [{lo:.3}, {hi:.3}], alignment loss {:.4} over {} pixels", loss.mean, loss.contributing);
    println!("maps written to {}", out.display());
    Ok(())
}
