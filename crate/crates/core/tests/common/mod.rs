#![allow(dead_code)]

use gwrap::gaussian::{OrientedGaussian, ALPHA_MAX};
use gwrap::Vec3;
use nalgebra::Quaternion;
use proptest::prelude::*;
use rand::Rng;

pub fn unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_gaussian(rng: &mut impl Rng, mean: Vec3, scale_lo: f64, scale_hi: f64) -> OrientedGaussian {
    let axis = unit(rng);
    let (s, c) = (0.5 * rng.random_range(0.0..std::f64::consts::PI)).sin_cos();
    OrientedGaussian::new(
        mean,
        Vec3::from_fn(|_, _| rng.random_range(scale_lo..scale_hi)),
        Quaternion::new(c, s * axis.x, s * axis.y, s * axis.z),
        rng.random_range(0.05..ALPHA_MAX),
        rng.random_range(-3.0..3.0),
        unit(rng),
        Vec3::from_fn(|_, _| rng.random_range(0.0..1.0)),
        ALPHA_MAX,
    )
    .unwrap()
}

pub fn arb_vec(lo: f64, hi: f64) -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(lo..hi).prop_map(|a| Vec3::new(a[0], a[1], a[2]))
}

pub fn arb_dir() -> impl Strategy<Value = Vec3> {
    arb_vec(-1.0, 1.0).prop_filter("nonzero", |v| v.norm() > 1e-3).prop_map(|v| v.normalize())
}

prop_compose! {
    pub fn arb_gaussian()(
        mean in arb_vec(-1.0, 1.0),
        scales in prop::array::uniform3(0.05..0.5f64),
        q in prop::array::uniform4(-1.0..1.0f64),
        opacity in 0.05..ALPHA_MAX,
        sign in -3.0..3.0f64,
        dir in arb_dir(),
        color in arb_vec(0.0, 1.0),
    ) -> OrientedGaussian {
        let q = if q.iter().map(|v| v * v).sum::<f64>() < 1e-6 { [1.0, 0.0, 0.0, 0.0] } else { q };
        OrientedGaussian::new(
            mean,
            Vec3::new(scales[0], scales[1], scales[2]),
            Quaternion::new(q[0], q[1], q[2], q[3]),
            opacity,
            sign,
            dir,
            color,
            ALPHA_MAX,
        )
        .unwrap()
    }
}
