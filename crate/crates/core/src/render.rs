//! Per-ray rendering by alpha compositing Gaussians at their points of
//! maximum contribution, and a ray-marching integrator over the equivalent
//! attenuation field.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{PinholeCamera, Ray};
use crate::fields::{max_contribution_t, transmittance};
use crate::math::Vec3;
use crate::rng::stream_rng;
use crate::scene::GaussianScene;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RenderConfig {
    pub background: [f64; 3],
    /// Compositing stops once the running transmittance drops below this.
    pub early_stop_t: f64,
    pub median_iterations: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            background: [0.0; 3],
            early_stop_t: 1e-4,
            median_iterations: 60,
        }
    }
}

/// One Gaussian's share of a ray.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Contribution {
    pub index: usize,
    pub t: f64,
    pub peak: f64,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayComposite {
    pub color: Vec3,
    pub alpha: f64,
    /// Distance where transmittance crosses 0.5, NaN if it never does.
    pub median_t: f64,
    pub normal: Vec3,
}

/// Row-major image with `channels` values per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub channels: u32,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: u32, height: u32, channels: u32) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![0.0; (width * height * channels) as usize],
        }
    }

    #[inline]
    pub fn offset(&self, x: u32, y: u32) -> usize {
        ((y * self.width + x) * self.channels) as usize
    }

    pub fn get(&self, x: u32, y: u32) -> &[f64] {
        let o = self.offset(x, y);
        &self.data[o..o + self.channels as usize]
    }

    pub fn get3(&self, x: u32, y: u32) -> Vec3 {
        let p = self.get(x, y);
        Vec3::new(p[0], p[1], p[2])
    }

    pub fn set(&mut self, x: u32, y: u32, values: &[f64]) {
        let o = self.offset(x, y);
        self.data[o..o + self.channels as usize].copy_from_slice(values);
    }

    pub fn pixels(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.channels as usize)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderedMaps {
    pub color: Image,
    pub alpha: Image,
    pub depth: Image,
    pub normal: Image,
}

/// Gaussians met by the ray, front to back, with their blend weights.
///
/// Exact ties in `t` (coincident primitives such as flip clones) are broken
/// so that the one whose normal faces the ray origin comes first.
pub fn ray_contributions(scene: &GaussianScene, ray: &Ray, config: &RenderConfig) -> Vec<Contribution> {
    let gaussians = scene.gaussians();
    let mut hits: Vec<(usize, f64, f64, f64)> = Vec::new();
    scene.for_each_support_on_ray(&ray.origin, &ray.dir, f64::INFINITY, |i, _, _| {
        let g = &gaussians[i];
        let t = max_contribution_t(ray, g);
        let facing = -g.oriented_normal().dot(&ray.dir);
        hits.push((i, t, g.eval(&ray.at(t)), facing));
    });
    hits.sort_unstable_by(|a, b| {
        a.1.total_cmp(&b.1)
            .then(b.3.total_cmp(&a.3))
            .then(a.0.cmp(&b.0))
    });
    let mut out = Vec::with_capacity(hits.len());
    let mut trans = 1.0;
    for (index, t, peak, _) in hits {
        out.push(Contribution {
            index,
            t,
            peak,
            weight: peak * trans,
        });
        trans *= 1.0 - peak;
        if trans < config.early_stop_t {
            break;
        }
    }
    out
}

/// Transmittance left after the listed contributions.
pub fn residual_transmittance(contribs: &[Contribution]) -> f64 {
    contribs.iter().fold(1.0, |acc, c| acc * (1.0 - c.peak))
}

pub fn composite_ray(scene: &GaussianScene, ray: &Ray, config: &RenderConfig) -> RayComposite {
    let contribs = ray_contributions(scene, ray, config);
    composite_from(scene, ray, &contribs, config)
}

pub(crate) fn composite_from(
    scene: &GaussianScene,
    ray: &Ray,
    contribs: &[Contribution],
    config: &RenderConfig,
) -> RayComposite {
    let gaussians = scene.gaussians();
    let mut color = Vec3::zeros();
    let mut normal = Vec3::zeros();
    let mut alpha = 0.0;
    let mut trans = 1.0;
    let mut crossing = None;
    for c in contribs {
        let g = &gaussians[c.index];
        color += g.color * c.weight;
        normal += g.oriented_normal() * c.weight;
        alpha += c.weight;
        trans *= 1.0 - c.peak;
        if crossing.is_none() && trans <= 0.5 {
            crossing = Some(c.t);
        }
    }
    color += Vec3::from(config.background) * trans;
    let median_t = match crossing {
        Some(hi) => median_depth(scene, ray, hi, config.median_iterations),
        None => f64::NAN,
    };
    RayComposite {
        color,
        alpha,
        median_t,
        normal,
    }
}

/// Bisection for `T(t) = 0.5` on `[0, hi]`, where `T(hi) ≤ 0.5`.
fn median_depth(scene: &GaussianScene, ray: &Ray, hi: f64, iterations: usize) -> f64 {
    let mut lo = 0.0;
    let mut hi = hi;
    let t_hi = transmittance(scene, ray, hi);
    if (t_hi - 0.5).abs() < 1e-6 {
        return hi;
    }
    let mut mid = hi;
    for _ in 0..iterations {
        mid = 0.5 * (lo + hi);
        let t = transmittance(scene, ray, mid);
        if (t - 0.5).abs() < 1e-6 {
            return mid;
        }
        if t > 0.5 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    mid
}

/// Renders every pixel center of `camera`.
pub fn render_maps(scene: &GaussianScene, camera: &PinholeCamera, config: &RenderConfig) -> RenderedMaps {
    let (w, h) = (camera.width, camera.height);
    let rows: Vec<Vec<RayComposite>> = (0..h)
        .into_par_iter()
        .map(|y| {
            (0..w)
                .map(|x| composite_ray(scene, &camera.pixel_ray(x, y), config))
                .collect()
        })
        .collect();
    let mut maps = RenderedMaps {
        color: Image::new(w, h, 3),
        alpha: Image::new(w, h, 1),
        depth: Image::new(w, h, 1),
        normal: Image::new(w, h, 3),
    };
    for (y, row) in rows.iter().enumerate() {
        for (x, px) in row.iter().enumerate() {
            let (x, y) = (x as u32, y as u32);
            let c = px.color.map(|v| v.clamp(0.0, 1.0));
            maps.color.set(x, y, c.as_slice());
            maps.alpha.set(x, y, &[px.alpha.clamp(0.0, 1.0)]);
            let depth = if px.alpha >= 0.5 { px.median_t } else { f64::NAN };
            maps.depth.set(x, y, &[depth]);
            maps.normal.set(x, y, px.normal.as_slice());
        }
    }
    maps
}

/// Trapezoid ray-marching of `∫ σ(s) T(s) c(s) ds` with `T = exp(-∫σ)`,
/// where `σ` is the unoriented attenuation. The color at each sample is the
/// color of the supporting Gaussian closest in Mahalanobis distance.
pub fn ray_march_color(scene: &GaussianScene, ray: &Ray, step: f64, config: &RenderConfig) -> Vec3 {
    assert!(step > 0.0, "step must be positive");
    let gaussians = scene.gaussians();
    let mut intervals: Vec<(f64, f64, usize)> = Vec::new();
    scene.for_each_support_on_ray(&ray.origin, &ray.dir, f64::INFINITY, |i, t0, t1| {
        intervals.push((t0.max(0.0), t1, i));
    });
    intervals.sort_by(|a, b| a.0.total_cmp(&b.0));

    // Merge overlapping support intervals and remember their members.
    let mut merged: Vec<(f64, f64, Vec<usize>)> = Vec::new();
    for (t0, t1, i) in intervals {
        match merged.last_mut() {
            Some(last) if t0 <= last.1 => {
                last.1 = last.1.max(t1);
                last.2.push(i);
            }
            _ => merged.push((t0, t1, vec![i])),
        }
    }

    let k2 = scene.support_sigma() * scene.support_sigma();
    let sample = |s: f64, members: &[usize]| -> (f64, Vec3) {
        let x = ray.at(s);
        let mut sigma = 0.0;
        let mut best = (f64::INFINITY, Vec3::zeros());
        for &i in members {
            let g = &gaussians[i];
            let m2 = g.mahalanobis_sq(&x);
            if m2 > k2 {
                continue;
            }
            sigma += (-ray.dir.dot(&g.grad_log_one_minus(&x))).max(0.0);
            if m2 < best.0 {
                best = (m2, g.color);
            }
        }
        (sigma, best.1)
    };

    let mut color = Vec3::zeros();
    let mut log_t: f64 = 0.0;
    for (t0, t1, members) in merged {
        let n = ((t1 - t0) / step).ceil().max(1.0) as usize;
        let h = (t1 - t0) / n as f64;
        let (mut sigma_prev, mut c_prev) = sample(t0, &members);
        for k in 1..=n {
            let s = t0 + h * k as f64;
            let (sigma, c) = sample(s, &members);
            let t_prev = log_t.exp();
            log_t -= 0.5 * h * (sigma_prev + sigma);
            let t_next = log_t.exp();
            color += (c_prev * (sigma_prev * t_prev) + c * (sigma * t_next)) * (0.5 * h);
            sigma_prev = sigma;
            c_prev = c;
        }
    }
    color + Vec3::from(config.background) * log_t.exp()
}

/// Alpha compositing against ray marching on random rays.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub rays: usize,
    /// Largest per-channel absolute color difference.
    pub max_error: f64,
    pub mean_error: f64,
    pub step: f64,
}

/// Casts `rays` rays from outside the scene toward randomly chosen
/// Gaussian means, jittered by up to one scale, and compares
/// [`composite_ray`] with [`ray_march_color`] at `step = min_scale / 100`.
pub fn equivalence_check(scene: &GaussianScene, rays: usize, seed: u64, config: &RenderConfig) -> EquivalenceReport {
    let step = scene.min_scale() / 100.0;
    let bbox = scene.bbox();
    let radius = bbox.diagonal().max(1e-9);
    let gaussians = scene.gaussians();
    let mut rng = stream_rng(seed, 0xe9);
    let mut jobs = Vec::with_capacity(rays);
    for _ in 0..rays {
        let g = &gaussians[rng.random_range(0..gaussians.len())];
        let unit = |rng: &mut rand_chacha::ChaCha8Rng| loop {
            let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let n = v.norm();
            if n > 1e-3 && n <= 1.0 {
                break v / n;
            }
        };
        let origin = bbox.center() + unit(&mut rng) * radius;
        let target = g.mean + unit(&mut rng) * (g.max_scale() * rng.random::<f64>());
        jobs.push(Ray::towards(origin, &target).0);
    }
    let errors: Vec<f64> = jobs
        .par_iter()
        .map(|ray| {
            let a = composite_ray(scene, ray, config).color;
            let b = ray_march_color(scene, ray, step, config);
            (a - b).amax()
        })
        .collect();
    EquivalenceReport {
        rays,
        max_error: errors.iter().copied().fold(0.0, f64::max),
        mean_error: errors.iter().sum::<f64>() / errors.len().max(1) as f64,
        step,
    }
}

/// Depth-derived surface normals in world space, oriented toward the
/// camera. Uses central differences of back-projected neighbors; pixels
/// with undefined depth in their 4-neighborhood, or on the image border,
/// get a zero normal.
pub fn depth_to_pseudo_normals(depth: &Image, camera: &PinholeCamera) -> Image {
    let (w, h) = (depth.width, depth.height);
    let mut out = Image::new(w, h, 3);
    let point = |x: u32, y: u32| -> Option<Vec3> {
        let d = depth.get(x, y)[0];
        if !d.is_finite() {
            return None;
        }
        let dir = camera.camera_dir(x as f64 + 0.5, y as f64 + 0.5).normalize();
        Some(dir * d)
    };
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let (Some(c), Some(l), Some(r), Some(u), Some(d)) = (
                point(x, y),
                point(x - 1, y),
                point(x + 1, y),
                point(x, y - 1),
                point(x, y + 1),
            ) else {
                continue;
            };
            let n = (r - l).cross(&(d - u));
            let len = n.norm();
            if len == 0.0 {
                continue;
            }
            let mut n = n / len;
            if n.dot(&c) > 0.0 {
                n = -n;
            }
            let world = camera.pose.rotation * n;
            out.set(x, y, world.as_slice());
        }
    }
    out
}

/// Per-pixel `1 - N(p)·n_D(p)` and its mean over pixels where both terms
/// are nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentLoss {
    pub mean: f64,
    pub sum: f64,
    pub contributing: usize,
    pub map: Image,
}

pub fn alignment_from_maps(normal: &Image, pseudo: &Image) -> AlignmentLoss {
    let mut map = Image::new(normal.width, normal.height, 1);
    let mut sum = 0.0;
    let mut contributing = 0;
    for y in 0..normal.height {
        for x in 0..normal.width {
            let n = normal.get3(x, y);
            let d = pseudo.get3(x, y);
            if n == Vec3::zeros() || d == Vec3::zeros() {
                continue;
            }
            let l = 1.0 - n.dot(&d);
            map.set(x, y, &[l]);
            sum += l;
            contributing += 1;
        }
    }
    let mean = if contributing > 0 { sum / contributing as f64 } else { 0.0 };
    AlignmentLoss {
        mean,
        sum,
        contributing,
        map,
    }
}

pub fn normal_alignment_loss(
    scene: &GaussianScene,
    camera: &PinholeCamera,
    config: &RenderConfig,
) -> AlignmentLoss {
    let maps = render_maps(scene, camera, config);
    let pseudo = depth_to_pseudo_normals(&maps.depth, camera);
    alignment_from_maps(&maps.normal, &pseudo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::OrientedGaussian;
    use approx::assert_relative_eq;

    fn blob(center: Vec3, sigma: f64, alpha: f64, color: Vec3) -> OrientedGaussian {
        let mut g = OrientedGaussian::isotropic(center, sigma, alpha, -Vec3::z()).unwrap();
        g.color = color;
        g
    }

    #[test]
    fn empty_scene_shows_background() {
        let scene = GaussianScene::new(vec![], vec![]);
        let cfg = RenderConfig {
            background: [0.2, 0.3, 0.4],
            ..RenderConfig::default()
        };
        let ray = Ray::new(Vec3::zeros(), Vec3::z());
        assert!(ray_contributions(&scene, &ray, &cfg).is_empty());
        let c = composite_ray(&scene, &ray, &cfg);
        assert_eq!(c.color, Vec3::new(0.2, 0.3, 0.4));
        assert_eq!(c.alpha, 0.0);
        assert!(c.median_t.is_nan());
        assert_eq!(c.normal, Vec3::zeros());
        assert_eq!(ray_march_color(&scene, &ray, 0.01, &cfg), Vec3::new(0.2, 0.3, 0.4));
    }

    #[test]
    fn single_gaussian_weight_is_its_peak() {
        let scene = GaussianScene::new(vec![blob(Vec3::new(0.0, 0.0, 4.0), 0.5, 0.7, Vec3::x())], vec![]);
        let ray = Ray::new(Vec3::zeros(), Vec3::z());
        let c = ray_contributions(&scene, &ray, &RenderConfig::default());
        assert_eq!(c.len(), 1);
        assert_relative_eq!(c[0].weight, 0.7, epsilon = 1e-15);
        assert_relative_eq!(c[0].t, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn median_depth_matches_closed_form() {
        // G(t) = 0.5 at t = L - σ sqrt(2 ln(α / 0.5)).
        let (l, sigma, alpha) = (4.0, 0.25, 0.9);
        let scene = GaussianScene::new(vec![blob(Vec3::new(0.0, 0.0, l), sigma, alpha, Vec3::x())], vec![]);
        let ray = Ray::new(Vec3::zeros(), Vec3::z());
        let c = composite_ray(&scene, &ray, &RenderConfig::default());
        let expected = l - sigma * (2.0 * (alpha / 0.5f64).ln()).sqrt();
        assert_relative_eq!(c.median_t, expected, epsilon = 1e-5);
        assert!((transmittance(&scene, &ray, c.median_t) - 0.5).abs() <= 1e-6);
        assert_relative_eq!(expected, l - 1.084 * sigma, epsilon = 1e-3 * sigma);
    }

    #[test]
    fn opaque_front_hides_back() {
        let front = blob(Vec3::new(0.0, 0.0, 2.0), 0.2, 0.999, Vec3::x());
        let back = blob(Vec3::new(0.0, 0.0, 4.0), 0.2, 0.9, Vec3::y());
        let scene = GaussianScene::new(vec![back, front], vec![]);
        let ray = Ray::new(Vec3::zeros(), Vec3::z());
        let contribs = ray_contributions(&scene, &ray, &RenderConfig::default());
        let far: f64 = contribs.iter().filter(|c| c.index == 0).map(|c| c.weight).sum();
        assert!(far < 1e-3);
    }

    #[test]
    fn weights_telescope() {
        let gs = (0..6)
            .map(|i| blob(Vec3::new(0.05 * i as f64, 0.0, 1.0 + 0.3 * i as f64), 0.2, 0.5, Vec3::x()))
            .collect();
        let scene = GaussianScene::new(gs, vec![]);
        let ray = Ray::new(Vec3::zeros(), Vec3::new(0.02, 0.01, 1.0));
        let contribs = ray_contributions(&scene, &ray, &RenderConfig::default());
        let total: f64 = contribs.iter().map(|c| c.weight).sum();
        assert!((total + residual_transmittance(&contribs) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ray_march_matches_single_gaussian() {
        let sigma = 0.3;
        let scene = GaussianScene::new(
            vec![blob(Vec3::new(0.05, -0.02, 3.0), sigma, 0.8, Vec3::new(0.2, 0.6, 0.9))],
            vec![],
        );
        let cfg = RenderConfig::default();
        let ray = Ray::new(Vec3::zeros(), Vec3::z());
        let a = composite_ray(&scene, &ray, &cfg).color;
        let b = ray_march_color(&scene, &ray, sigma / 100.0, &cfg);
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() <= 1e-3 * a[k], "{a} vs {b}");
        }
    }

    #[test]
    fn pseudo_normals_zero_around_holes() {
        let cam = PinholeCamera::look_at(Vec3::new(0.0, 0.0, -3.0), Vec3::zeros(), Vec3::y(), 60.0, 9, 9).unwrap();
        let mut depth = Image::new(9, 9, 1);
        for y in 0..9 {
            for x in 0..9 {
                let z = cam.camera_dir(x as f64 + 0.5, y as f64 + 0.5);
                // Plane at camera-space z = 3, stored as distance along the ray.
                depth.set(x, y, &[3.0 * z.norm()]);
            }
        }
        depth.set(4, 4, &[f64::NAN]);
        let n = depth_to_pseudo_normals(&depth, &cam);
        for (x, y) in [(4, 4), (3, 4), (5, 4), (4, 3), (4, 5)] {
            assert_eq!(n.get3(x, y), Vec3::zeros());
        }
        let inner = n.get3(2, 2);
        assert!(inner.dot(&Vec3::new(0.0, 0.0, -1.0)) > 0.9999);
    }
}
