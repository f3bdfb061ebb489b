//! End-to-end acceptance run. Every criterion prints one PASS/FAIL line and
//! the process exits nonzero if any failed. Runs without the libtest harness
//! so the lines always reach the console.

use std::sync::OnceLock;
use std::time::Instant;

use gwrap::evalkit::{evaluate_mesh, uniform_sample, EvalConfig, MeshDistance, PointCloud, Protocol};
use gwrap::fields::{attenuation, best_camera, oriented_attenuation, transmittance, FieldConfig, Fields};
use gwrap::fixtures::{make_fixture, randomize_orientations, FixtureKind, FixtureParams};
use gwrap::gaussian::{OrientedGaussian, ALPHA_MAX};
use gwrap::math::{angle_deg, fibonacci_sphere};
use gwrap::mesh::watertight_check;
use gwrap::meshing::{mesh_mtet, mesh_pam, pam_newton_project, MtetConfig, PamConfig, PivotScheme};
use gwrap::render::{composite_ray, normal_alignment_loss, RenderConfig};
use gwrap::wrap::{densify_flip, optimize_normals, per_gaussian_error, visible_gaussians, WrapConfig};
use gwrap::{GaussianScene, Ray, TriangleMesh, Vec3};
use nalgebra::Quaternion;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn run(id: usize, name: &str, budget_s: f64, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let secs = start.elapsed().as_secs_f64();
    let in_time = secs <= budget_s;
    let pass = out.pass && in_time;
    println!(
        "[{}] criterion {id:>2} {name}: {} ({secs:.1}s of {budget_s:.0}s{})",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        if in_time { "" } else { ", over budget" },
    );
    pass
}

fn unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_quat(rng: &mut impl Rng) -> Quaternion<f64> {
    let v = unit(rng);
    let angle = rng.random_range(0.0..std::f64::consts::PI);
    let (s, c) = (0.5 * angle).sin_cos();
    Quaternion::new(c, s * v.x, s * v.y, s * v.z)
}

fn random_gaussian(rng: &mut impl Rng, mean: Vec3, scale_lo: f64, scale_hi: f64) -> OrientedGaussian {
    let scales = Vec3::from_fn(|_, _| rng.random_range(scale_lo..scale_hi));
    let color = Vec3::from_fn(|_, _| rng.random_range(0.0..1.0));
    OrientedGaussian::new(
        mean,
        scales,
        random_quat(rng),
        rng.random_range(0.05..ALPHA_MAX),
        rng.random_range(-3.0..3.0),
        unit(rng),
        color,
        ALPHA_MAX,
    )
    .unwrap()
}

fn sphere(count: usize, tangent_scale: f64, normal_scale: f64) -> GaussianScene {
    let p = FixtureParams {
        count,
        tangent_scale,
        normal_scale,
        ..Default::default()
    };
    make_fixture(FixtureKind::SphereShell, &p).unwrap()
}

fn sphere_2000() -> &'static GaussianScene {
    static S: OnceLock<GaussianScene> = OnceLock::new();
    S.get_or_init(|| sphere(2000, 0.5, 0.1))
}

fn sphere_mtet() -> &'static TriangleMesh {
    static M: OnceLock<TriangleMesh> = OnceLock::new();
    M.get_or_init(|| mesh_mtet(sphere_2000(), &MtetConfig::default()).unwrap())
}

fn sphere_pam() -> &'static TriangleMesh {
    static M: OnceLock<TriangleMesh> = OnceLock::new();
    M.get_or_init(|| {
        let config = PamConfig {
            samples: 10_000,
            ..Default::default()
        };
        mesh_pam(sphere_2000(), &config).unwrap()
    })
}

fn sphere_gt() -> PointCloud {
    PointCloud::new(fibonacci_sphere(100_000), None).unwrap()
}

fn reciprocity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut equal, mut nonzero, mut total) = (0, 0, 0);
    for _ in 0..100 {
        let n = rng.random_range(1..=8);
        let gaussians: Vec<_> = (0..n)
            .map(|_| {
                let m = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
                random_gaussian(&mut rng, m, 0.1, 0.6)
            })
            .collect();
        let scene = GaussianScene::new(gaussians, vec![]);
        for _ in 0..100 {
            let g = &scene.gaussians()[rng.random_range(0..n)];
            let x = g.mean + unit(&mut rng) * rng.random_range(0.0..2.0 * g.max_scale());
            let w = unit(&mut rng);
            let a = oriented_attenuation(&scene, &x, &w);
            let b = oriented_attenuation(&scene, &x, &(-w));
            total += 1;
            equal += (a.to_bits() == b.to_bits()) as usize;
            nonzero += (a > 0.0) as usize;
        }
    }
    let g = OrientedGaussian::isotropic(Vec3::zeros(), 1.0, 0.9, Vec3::z()).unwrap();
    let scene = GaussianScene::new(vec![g], vec![]);
    let x = Vec3::new(0.5, 0.0, 0.0);
    let w = Vec3::x();
    let (fwd, back) = (attenuation(&scene, &x, &w), attenuation(&scene, &x, &(-w)));
    let witness = fwd != back;
    outcome(
        equal == total && nonzero > total / 4 && witness,
        format!("{equal}/{total} exact, {nonzero} nonzero; unoriented witness {fwd:.4} vs {back:.4}"),
    )
}

/// Ray march with per-Gaussian absorption taken from the drop of
/// `log(1 - G)` over each step, clipped at zero once the value decreases.
fn marched_color(scene: &GaussianScene, ray: &Ray, t_end: f64, step: f64) -> Vec3 {
    let gs = scene.gaussians();
    let log1m = |t: f64| -> Vec<f64> { gs.iter().map(|g| (-g.eval(&ray.at(t))).ln_1p()).collect() };
    let mut prev = log1m(0.0);
    let mut trans = 1.0;
    let mut color = Vec3::zeros();
    let steps = (t_end / step).ceil() as usize;
    for k in 1..=steps {
        let cur = log1m(k as f64 * step);
        let absorbed: Vec<f64> = prev.iter().zip(&cur).map(|(a, b)| (a - b).max(0.0)).collect();
        let total: f64 = absorbed.iter().sum();
        if total > 0.0 {
            let mix: Vec3 = gs.iter().zip(&absorbed).map(|(g, a)| g.color * *a).sum();
            color += mix * (trans * (1.0 - (-total).exp()) / total);
            trans *= (-total).exp();
        }
        prev = cur;
    }
    color
}

fn rendering_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    let mut rays = 0;
    for _ in 0..5 {
        let max_scale: f64 = 0.1;
        let spacing = 6.0 * max_scale * rng.random_range(1.0..1.3);
        let mut gaussians = Vec::new();
        for i in 0..8 {
            let corner = Vec3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64);
            gaussians.push(random_gaussian(&mut rng, corner * spacing, 0.04, max_scale));
        }
        let scene = GaussianScene::new(gaussians, vec![]);
        let center = Vec3::repeat(0.5 * spacing);
        let step = scene.min_scale() / 200.0;
        for _ in 0..100 {
            let g = &scene.gaussians()[rng.random_range(0..8)];
            let origin = center + unit(&mut rng) * 3.0;
            let target = g.mean + unit(&mut rng) * rng.random_range(0.0..g.max_scale());
            let ray = Ray::towards(origin, &target).0;
            let a = composite_ray(&scene, &ray, &RenderConfig::default()).color;
            let b = marched_color(&scene, &ray, 6.0, step);
            worst = worst.max((a - b).amax());
            rays += 1;
        }
    }
    outcome(worst < 5e-3, format!("max per-channel error {worst:.2e} over {rays} rays"))
}

fn gradient_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let g = random_gaussian(&mut rng, Vec3::zeros(), 0.2, 2.0);
        let local = unit(&mut rng) * rng.random_range(0.3..3.0);
        let x = g.mean + g.rotation() * local.component_mul(g.scales());
        let f = |p: Vec3| (-g.eval(&p)).ln_1p();
        let fd = Vec3::from_fn(|i, _| {
            let mut e = Vec3::zeros();
            e[i] = h;
            (f(x + e) - f(x - e)) / (2.0 * h)
        });
        let an = g.grad_log_one_minus(&x);
        worst = worst.max((an - fd).norm() / an.norm());
    }
    outcome(worst < 1e-5, format!("max relative error {worst:.2e} over 1000 samples"))
}

/// `log v` integrated along the segment from `origin` to `x` with the
/// trapezoid rule over the oriented field of all Gaussians.
fn integrated_log_vacancy(scene: &GaussianScene, origin: &Vec3, x: &Vec3, step: f64) -> f64 {
    let sigma = scene.support_sigma();
    let d = x - origin;
    let len = d.norm();
    let dir = d / len;
    let near: Vec<&OrientedGaussian> = scene
        .gaussians()
        .iter()
        .filter(|g| {
            let s = (g.mean - origin).dot(&dir).clamp(0.0, len);
            (origin + dir * s - g.mean).norm() <= sigma * g.max_scale()
        })
        .collect();
    let field = |p: Vec3| -> f64 {
        near.iter()
            .filter(|g| g.mahalanobis_sq(&p) <= sigma * sigma && g.oriented_normal().dot(&(p - g.mean)) >= 0.0)
            .map(|g| dir.dot(&g.grad_log_one_minus(&p)))
            .sum()
    };
    let n = (len / step).ceil().max(1.0) as usize;
    let h = len / n as f64;
    let mut sum = 0.5 * (field(*origin) + field(*x));
    for k in 1..n {
        sum += field(origin + dir * (k as f64 * h));
    }
    sum * h
}

fn vacancy_bound() -> Outcome {
    let scene = sphere(400, 1.0, 0.1);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let all: Vec<usize> = (0..scene.cameras.len()).collect();
    let step = scene.min_scale() / 20.0;
    let (mut inner_max, mut outer_min, mut excess): (f64, f64, f64) = (0.0, 1.0, f64::NEG_INFINITY);
    let mut check = |x: Vec3| -> f64 {
        let (cam, v) = best_camera(&scene, &x, &all).unwrap();
        let integral = integrated_log_vacancy(&scene, &scene.cameras[cam].center(), &x, step).exp();
        excess = excess.max(v - integral);
        v
    };
    for _ in 0..150 {
        let v = check(unit(&mut rng) * rng.random_range(0.0..0.8));
        inner_max = inner_max.max(v);
        let v = check(unit(&mut rng) * rng.random_range(1.2..2.0));
        outer_min = outer_min.min(v);
        check(unit(&mut rng) * rng.random_range(0.9..1.1));
    }
    outcome(
        inner_max < 0.01 && outer_min > 0.99 && excess <= 1e-3,
        format!("interior max {inner_max:.2e}, exterior min {outer_min:.6}, bound excess over integral {excess:.2e}"),
    )
}

/// Radius of the 0.5 vacancy crossing along direction `d`.
fn iso_radius(fields: &Fields, d: &Vec3, lo: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..50 {
        let m = 0.5 * (lo + hi);
        if fields.vacancy(&(d * m)).unwrap() < 0.5 {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

fn normal_fidelity() -> Outcome {
    let scene = sphere(400, 0.5, 0.1);
    let fields = Fields::new(&scene, FieldConfig::default());
    let dirs = fibonacci_sphere(500);
    let mut total = 0.0;
    let mut worst: f64 = 0.0;
    for d in &dirs {
        let x = d * iso_radius(&fields, d, 0.8, 1.3);
        let a = angle_deg(&fields.normal(&x), d);
        total += a;
        worst = worst.max(a);
    }
    let mean = total / dirs.len() as f64;
    outcome(mean < 10.0, format!("mean angle {mean:.2} deg, max {worst:.2} deg on {} isosurface points", dirs.len()))
}

fn wrapping() -> Outcome {
    let p = FixtureParams {
        count: 400,
        tangent_scale: 0.5,
        ..Default::default()
    };
    let mut scene = make_fixture(FixtureKind::SphereShell, &p).unwrap();
    randomize_orientations(&mut scene, 1.0, 7);
    let config = WrapConfig {
        iterations: 200,
        densify: false,
        ..Default::default()
    };
    let visible = visible_gaussians(&scene, &config.render, config.min_weight);
    let (wrapped, report) = optimize_normals(scene, &config).unwrap();
    let (mut ok, mut seen) = (0, 0);
    for (g, v) in wrapped.gaussians().iter().zip(&visible) {
        if *v {
            seen += 1;
            ok += (g.oriented_normal().dot(&g.mean) > 0.0) as usize;
        }
    }
    let frac = ok as f64 / seen as f64;

    let p = FixtureParams {
        count: 12,
        cameras: 1,
        back_cameras: 1,
        fov_deg: 20.0,
        tangent_scale: 0.5,
        ..Default::default()
    };
    let plane = make_fixture(FixtureKind::PlanePatch, &p).unwrap();
    let render = RenderConfig::default();
    let hidden = |s: &GaussianScene| normal_alignment_loss(s, &s.cameras[1], &render).mean;
    let cfg = WrapConfig {
        iterations: 100,
        densify: false,
        views_per_step: 2,
        ..Default::default()
    };
    let (mut fitted, _) = optimize_normals(plane, &cfg).unwrap();
    let before = hidden(&fitted);
    let errors = per_gaussian_error(&fitted, &fitted.cameras, &render);
    let clones = densify_flip(&mut fitted, &errors, 0.5);
    let (refit, _) = optimize_normals(fitted, &cfg).unwrap();
    let after = hidden(&refit);
    let reduction = 1.0 - after / before;
    outcome(
        frac >= 0.9 && reduction > 0.5,
        format!(
            "sphere {ok}/{seen} visible outward (loss {:.3} -> {:.3}); plane hidden-view loss {before:.3} -> {after:.3} ({:.0}% less, {clones} clones)",
            report.initial_loss,
            report.loss_trace.last().copied().unwrap_or(f64::NAN),
            100.0 * reduction
        ),
    )
}

fn newton() -> Outcome {
    let scene = sphere(400, 0.5, 0.4);
    let fields = Fields::new(&scene, FieldConfig::default());
    let dirs = fibonacci_sphere(400);
    let mut points: Vec<Vec3> = dirs
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let r = iso_radius(&fields, d, 0.8, 1.5);
            d * (r + if i % 2 == 0 { 0.05 } else { -0.05 })
        })
        .collect();
    let mut medians = Vec::new();
    let mut converged = 0.0;
    for _ in 0..10 {
        points = pam_newton_project(&points, &fields, 1, scene.max_scale()).unwrap();
        let mut err: Vec<f64> = points.iter().map(|x| (fields.vacancy(x).unwrap() - 0.5).abs()).collect();
        err.sort_by(f64::total_cmp);
        medians.push(err[err.len() / 2]);
        converged = err.iter().filter(|&&e| e < 1e-3).count() as f64 / err.len() as f64;
    }
    let monotone = medians[..5].windows(2).all(|w| w[1] < w[0]);
    let trace: Vec<String> = medians[..5].iter().map(|m| format!("{m:.1e}")).collect();
    outcome(
        converged >= 0.95 && monotone,
        format!("{:.1}% within 1e-3 after 10 steps, medians {}", 100.0 * converged, trace.join(" ")),
    )
}

fn watertight() -> Outcome {
    let cube = make_fixture(
        FixtureKind::CubeShell,
        &FixtureParams {
            count: 8,
            tangent_scale: 0.5,
            ..Default::default()
        },
    )
    .unwrap();
    let cube_pam = PamConfig {
        samples: 5000,
        ..Default::default()
    };
    let meshes = [
        ("sphere/mtet", sphere_mtet().clone()),
        ("sphere/pam", sphere_pam().clone()),
        ("cube/mtet", mesh_mtet(&cube, &MtetConfig::default()).unwrap()),
        ("cube/pam", mesh_pam(&cube, &cube_pam).unwrap()),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, m) in &meshes {
        let w = watertight_check(m);
        pass &= !m.is_empty() && w.boundary_edges == 0 && w.non_manifold_edges == 0;
        parts.push(format!("{name} {}f b{} nm{}", m.faces.len(), w.boundary_edges, w.non_manifold_edges));
    }
    outcome(pass, parts.join(", "))
}

/// Symmetric Chamfer to the unit sphere: exact distances from mesh samples,
/// mesh distances from sphere samples.
fn sphere_chamfer(mesh: &TriangleMesh) -> f64 {
    let pred = uniform_sample(mesh, 100_000, None, 11).unwrap();
    let to_sphere = pred.points.iter().map(|p| (p.norm() - 1.0).abs()).sum::<f64>() / pred.len() as f64;
    let dist = MeshDistance::new(mesh);
    let gt = fibonacci_sphere(20_000);
    let to_mesh = gt.iter().map(|p| dist.distance(p)).sum::<f64>() / gt.len() as f64;
    0.5 * (to_sphere + to_mesh)
}

fn accuracy() -> Outcome {
    let gt = sphere_gt();
    let config = EvalConfig {
        uniform_count: 200_000,
        ..Default::default()
    };
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, m) in [("mtet", sphere_mtet()), ("pam", sphere_pam())] {
        let ch = sphere_chamfer(m);
        let f1 = evaluate_mesh(m, &gt, Protocol::Uniform, &[], &config).unwrap();
        pass &= ch < 0.02 && f1.f1 >= 0.95;
        parts.push(format!("{name} chamfer {ch:.4} F1 {:.4} (tau {:.4})", f1.f1, f1.tau));
    }
    outcome(pass, parts.join(", "))
}

fn tessellation_bias() -> Outcome {
    let gt = sphere_gt();
    let tau = 0.015;
    let config = EvalConfig {
        uniform_count: 200_000,
        seed: 1,
        tau: Some(tau),
        crop: None,
    };
    let score = |m: &TriangleMesh, p| evaluate_mesh(m, &gt, p, &[], &config).unwrap();
    let two = sphere_mtet();
    let fine = two.subdivided();
    let (legacy, legacy_fine) = (score(two, Protocol::Legacy), score(&fine, Protocol::Legacy));
    let (uniform, uniform_fine) = (score(two, Protocol::Uniform), score(&fine, Protocol::Uniform));
    let growth = legacy_fine.pred_points as f64 / legacy.pred_points as f64;
    let legacy_delta = legacy_fine.f1 - legacy.f1;
    let uniform_delta = uniform_fine.f1 - uniform.f1;

    let nine = mesh_mtet(
        sphere_2000(),
        &MtetConfig {
            pivots: PivotScheme::Nine,
            ..Default::default()
        },
    )
    .unwrap();
    let (legacy9, uniform9) = (score(&nine, Protocol::Legacy), score(&nine, Protocol::Uniform));
    let pivot_legacy = legacy9.f1 - legacy.f1;
    let pivot_uniform = uniform9.f1 - uniform.f1;
    outcome(
        uniform_delta.abs() < 0.01
            && (growth - 4.0).abs() < 0.2
            && legacy_delta.abs() > 1e-3
            && pivot_legacy.abs() > 0.02
            && pivot_uniform.abs() < 0.02,
        format!(
            "tau {tau}: subdivision legacy {:.3}->{:.3} ({growth:.2}x points), uniform {:.4}->{:.4}; \
             2p vs 9p legacy {:.3} vs {:.3}, uniform {:.4} vs {:.4}",
            legacy.f1, legacy_fine.f1, uniform.f1, uniform_fine.f1, legacy.f1, legacy9.f1, uniform.f1, uniform9.f1
        ),
    )
}

/// Transmittance of a single Gaussian in the square-root form: the local
/// value is blended with the peak value along the ray.
fn sqrt_transmittance(g: &OrientedGaussian, ray: &Ray, t: f64) -> f64 {
    let peak = gwrap::fields::max_contribution_t(ray, g);
    1.0 - (g.eval(&ray.at(t.min(peak))) * g.eval(&ray.at(peak))).sqrt()
}

fn crossing_spread(g: &OrientedGaussian, origin: &Vec3, level: f64, trans: impl Fn(&Ray, f64) -> f64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut radii = Vec::new();
    for _ in 0..2000 {
        let target = g.mean + unit(&mut rng) * rng.random_range(0.0..2.0 * g.max_scale());
        let ray = Ray::towards(*origin, &target).0;
        let peak = gwrap::fields::max_contribution_t(&ray, g);
        if trans(&ray, peak) >= level {
            continue;
        }
        let (mut lo, mut hi) = (0.0, peak);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if trans(&ray, m) > level {
                lo = m;
            } else {
                hi = m;
            }
        }
        radii.push((ray.at(0.5 * (lo + hi)) - g.mean).norm());
    }
    let max = radii.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = radii.iter().copied().fold(f64::INFINITY, f64::min);
    (max - min, radii.len())
}

fn sphericity() -> Outcome {
    let g = OrientedGaussian::isotropic(Vec3::new(0.2, -0.1, 0.3), 0.5, 0.9, Vec3::z()).unwrap();
    let scene = GaussianScene::new(vec![g.clone()], vec![]);
    let origin = Vec3::new(0.0, 0.0, -3.0);
    let level = 0.5;
    let (ours, n) = crossing_spread(&g, &origin, level, |ray, t| transmittance(&scene, ray, t));
    let (root, m) = crossing_spread(&g, &origin, level, |ray, t| sqrt_transmittance(&g, ray, t));
    outcome(
        ours < 1e-6 && root > 1e-3 && n > 100 && m > 100,
        format!("radius spread {ours:.1e} over {n} rays; square-root variant {root:.3} over {m} rays"),
    )
}

fn pam_resolution() -> Outcome {
    let scene = sphere(400, 0.5, 0.1);
    let edge = |samples| {
        let m = mesh_pam(
            &scene,
            &PamConfig {
                samples,
                ..Default::default()
            },
        )
        .unwrap();
        m.mean_edge_length()
    };
    let (coarse, fine) = (edge(4000), edge(8000));
    let ratio = fine / coarse;
    let target = std::f64::consts::FRAC_1_SQRT_2;
    outcome(
        (ratio / target - 1.0).abs() <= 0.2,
        format!("{} Gaussians: edge {coarse:.4} -> {fine:.4}, ratio {ratio:.3} (target {target:.3})", scene.len()),
    )
}

fn main() {
    let results = [
        run(1, "reciprocity", 10.0, reciprocity),
        run(2, "rendering equivalence", 120.0, rendering_equivalence),
        run(3, "gradient oracle", 5.0, gradient_oracle),
        run(4, "vacancy lower bound", 60.0, vacancy_bound),
        run(5, "normal field fidelity", 60.0, normal_fidelity),
        run(6, "wrapping optimization", 600.0, wrapping),
        run(7, "newton projection", 60.0, newton),
        run(8, "watertightness", 300.0, watertight),
        run(9, "geometric accuracy", 300.0, accuracy),
        run(10, "tessellation bias", 300.0, tessellation_bias),
        run(11, "isosurface sphericity", 60.0, sphericity),
        run(12, "pam resolution decoupling", 300.0, pam_resolution),
    ];
    let failed: Vec<usize> = results.iter().enumerate().filter(|(_, p)| !**p).map(|(i, _)| i + 1).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", results.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
