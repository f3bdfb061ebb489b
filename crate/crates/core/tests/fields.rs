mod common;

use common::{arb_dir, arb_gaussian, arb_vec, random_gaussian, unit};
use gwrap::fields::{
    attenuation, best_camera, field_sample, oriented_attenuation, transmittance, vacancy_lower_bound, vector_field,
    FieldConfig,
};
use gwrap::fixtures::{make_fixture, FixtureKind, FixtureParams};
use gwrap::{GaussianScene, Ray, Vec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

proptest! {
    #[test]
    fn oriented_attenuation_is_reciprocal(
        gs in prop::collection::vec(arb_gaussian(), 1..6),
        x in arb_vec(-1.5, 1.5),
        w in arb_dir(),
    ) {
        let scene = GaussianScene::new(gs, vec![]);
        let a = oriented_attenuation(&scene, &x, &w);
        let b = oriented_attenuation(&scene, &x, &(-w));
        prop_assert_eq!(a.to_bits(), b.to_bits());
    }

    #[test]
    fn attenuations_agree_on_sum(g in arb_gaussian(), x in arb_vec(-1.5, 1.5), w in arb_dir()) {
        // For one Gaussian the two one-sided unoriented terms add up to the
        // full directional derivative.
        let scene = GaussianScene::new(vec![g.clone()], vec![]);
        if scene.supports(0, &x) {
            let both = attenuation(&scene, &x, &w) + attenuation(&scene, &x, &(-w));
            let d = w.dot(&g.grad_log_one_minus(&x)).abs();
            prop_assert!((both - d).abs() <= 1e-12 * d.max(1.0));
        }
    }

    #[test]
    fn sample_parts_sum_to_one(gs in prop::collection::vec(arb_gaussian(), 0..5), x in arb_vec(-1.5, 1.5)) {
        let mut scene = GaussianScene::new(gs, vec![]);
        scene.cameras = make_fixture(FixtureKind::SphereShell, &FixtureParams { cameras: 3, ..Default::default() })
            .unwrap()
            .cameras;
        let s = field_sample(&scene, &x, &FieldConfig::default()).unwrap();
        prop_assert_eq!(s.vacancy + s.occupancy, 1.0);
    }
}

#[test]
fn unoriented_attenuation_has_a_witness() {
    let g = gwrap::OrientedGaussian::isotropic(Vec3::zeros(), 1.0, 0.5, Vec3::z()).unwrap();
    let scene = GaussianScene::new(vec![g], vec![]);
    let x = Vec3::new(0.0, 0.7, 0.2);
    assert_ne!(attenuation(&scene, &x, &Vec3::y()), attenuation(&scene, &x, &-Vec3::y()));
}

#[test]
fn transmittance_never_increases() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        let gs = (0..n)
            .map(|_| {
                let m = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
                random_gaussian(&mut rng, m, 0.05, 0.5)
            })
            .collect();
        let scene = GaussianScene::new(gs, vec![]);
        let ray = Ray::new(unit(&mut rng) * 3.0, unit(&mut rng));
        let mut prev = 1.0;
        for k in 0..100 {
            let t = transmittance(&scene, &ray, 6.0 * k as f64 / 99.0);
            assert!(t <= prev, "transmittance rose from {prev} to {t}");
            prev = t;
        }
    }
}

#[test]
fn lower_bound_is_the_best_camera() {
    let scene = make_fixture(FixtureKind::SphereShell, &FixtureParams { count: 200, ..Default::default() }).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let all: Vec<usize> = (0..scene.cameras.len()).collect();
    for _ in 0..100 {
        let x = unit(&mut rng) * rng.random_range(0.0..1.5);
        let v = vacancy_lower_bound(&scene, &x).unwrap();
        let per_camera: Vec<f64> = scene
            .cameras
            .iter()
            .map(|c| {
                let (ray, t) = Ray::towards(c.center(), &x);
                transmittance(&scene, &ray, t)
            })
            .collect();
        let best = per_camera.iter().copied().fold(0.0, f64::max);
        assert!(per_camera.iter().all(|&t| t <= v + 1e-15));
        assert!((v - best).abs() <= 1e-12, "{v} vs {best}");
        assert_eq!(best_camera(&scene, &x, &all).unwrap().1, v);
    }
}

#[test]
fn full_neighborhood_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for _ in 0..50 {
        let n = rng.random_range(1..=20);
        let gs: Vec<_> = (0..n)
            .map(|_| {
                let m = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
                random_gaussian(&mut rng, m, 0.1, 0.6)
            })
            .collect();
        let scene = GaussianScene::new(gs, vec![]);
        let x = Vec3::from_fn(|_, _| rng.random_range(-1.2..1.2));
        let v = vector_field(&scene, &x, n);
        let sigma2 = scene.support_sigma().powi(2);
        let brute: Vec3 = scene
            .gaussians()
            .iter()
            .filter(|g| g.mahalanobis_sq(&x) <= sigma2 && g.oriented_normal().dot(&(x - g.mean)) >= 0.0)
            .map(|g| g.grad_log_one_minus(&x))
            .sum();
        assert!((v - brute).norm() <= 1e-12 * brute.norm().max(1.0), "{v} vs {brute}");
    }
}
