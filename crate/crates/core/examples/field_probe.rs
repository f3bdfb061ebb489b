//! Walks outward along one ray through the sphere shell and prints the
//! vacancy, occupancy and normal field at each step.

use gwrap::fields::{FieldConfig, Fields};
use gwrap::fixtures::{make_fixture, FixtureKind, FixtureParams};
use gwrap::math::angle_deg;
use gwrap::Vec3;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let scene = make_fixture(FixtureKind::SphereShell, &FixtureParams::default())?;
    let fields = Fields::new(&scene, FieldConfig::default());
    let dir = Vec3::new(1.0, 2.0, 0.5).normalize();
    println!("{:>6} {:>9} {:>9} {:>8} {:>9}", "r", "vacancy", "occupancy", "support", "angle");
    for k in 0..=24 {
        let r = 0.88 + 0.01 * k as f64;
        let s = fields.sample(&(dir * r))?;
        let angle = if s.normal == Vec3::zeros() { f64::NAN } else { angle_deg(&s.normal, &dir) };
        println!("{r:>6.3} {:>9.4} {:>9.4} {:>8} {angle:>8.2}°", s.vacancy, s.occupancy, s.support_count);
    }
    Ok(())
}
