//! Orientation-only wrapping: gradient descent on the normal alignment loss
//! over `(normal_sign, normal_dir)` with flip-and-clone densification.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::PinholeCamera;
use crate::gaussian::oriented_normal_of;
use crate::math::Vec3;
use crate::render::{composite_from, depth_to_pseudo_normals, ray_contributions, Image, RenderConfig};
use crate::scene::GaussianScene;

#[derive(Debug, Error, PartialEq)]
pub enum WrapError {
    #[error("loss diverged at iteration {iteration}: {loss} > 4 x initial {initial}")]
    Diverged { iteration: usize, loss: f64, initial: f64 },
    #[error("scene has no cameras")]
    NoCameras,
    #[error("invalid wrap config: {0}")]
    BadConfig(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WrapConfig {
    pub iterations: usize,
    /// Step size for `normal_sign`.
    pub learning_rate: f64,
    /// Step size for `normal_dir`.
    pub dir_learning_rate: f64,
    pub loss_weight: f64,
    pub densify: bool,
    pub densify_every: usize,
    pub densify_fraction: f64,
    pub fd_step: f64,
    pub views_per_step: usize,
    /// Blend weight below which a Gaussian is not differentiated at a pixel.
    pub min_weight: f64,
    pub seed: u64,
    pub render: RenderConfig,
}

impl Default for WrapConfig {
    fn default() -> Self {
        Self {
            iterations: 200,
            learning_rate: 0.05,
            dir_learning_rate: 0.02,
            loss_weight: 0.05,
            densify: true,
            densify_every: 50,
            densify_fraction: 0.05,
            fd_step: 1e-3,
            views_per_step: 4,
            min_weight: 1e-4,
            seed: 0,
            render: RenderConfig::default(),
        }
    }
}

impl WrapConfig {
    pub fn validate(&self) -> Result<(), WrapError> {
        let bad = |m: &str| Err(WrapError::BadConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.dir_learning_rate > 0.0) {
            return bad("learning rates must be positive");
        }
        if !(self.loss_weight > 0.0) {
            return bad("loss_weight must be positive");
        }
        if self.densify_every == 0 || self.views_per_step == 0 {
            return bad("densify_every and views_per_step must be positive");
        }
        if !(self.densify_fraction > 0.0 && self.densify_fraction <= 0.5) {
            return bad("densify_fraction must lie in (0, 0.5]");
        }
        if !(self.fd_step > 0.0) {
            return bad("fd_step must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensifyEvent {
    /// Number of completed iterations when the clones were added.
    pub iteration: usize,
    pub clones_added: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct WrapReport {
    pub initial_loss: f64,
    /// Mean per-pixel alignment loss over all cameras after each iteration.
    pub loss_trace: Vec<f64>,
    /// Per-Gaussian error of the final scene.
    pub errors: Vec<f64>,
    pub densify_events: Vec<DensifyEvent>,
}

impl WrapReport {
    pub fn clones_at(&self, iteration: usize) -> usize {
        self.densify_events
            .iter()
            .filter(|e| e.iteration == iteration)
            .map(|e| e.clones_added)
            .sum()
    }

    pub fn total_clones(&self) -> usize {
        self.densify_events.iter().map(|e| e.clones_added).sum()
    }
}

/// Frozen per-view quantities. Blend weights and depth only depend on
/// geometry, so they stay valid until Gaussians are added.
#[derive(Clone, Debug)]
struct ViewCache {
    pixels: Vec<PixelCache>,
}

#[derive(Clone, Debug)]
struct PixelCache {
    contribs: Vec<(u32, f64)>,
    pseudo: Vec3,
}

fn build_view(scene: &GaussianScene, camera: &PinholeCamera, render: &RenderConfig) -> ViewCache {
    let (w, h) = (camera.width, camera.height);
    let per_pixel: Vec<(Vec<(u32, f64)>, f64)> = (0..w * h)
        .into_par_iter()
        .map(|p| {
            let ray = camera.pixel_ray(p % w, p / w);
            let contribs = ray_contributions(scene, &ray, render);
            let comp = composite_from(scene, &ray, &contribs, render);
            let depth = if comp.alpha >= 0.5 { comp.median_t } else { f64::NAN };
            (contribs.iter().map(|c| (c.index as u32, c.weight)).collect(), depth)
        })
        .collect();
    let mut depth = Image::new(w, h, 1);
    for (p, (_, d)) in per_pixel.iter().enumerate() {
        depth.data[p] = *d;
    }
    let pseudo = depth_to_pseudo_normals(&depth, camera);
    let pixels = per_pixel
        .into_iter()
        .enumerate()
        .filter(|(_, (c, _))| !c.is_empty())
        .map(|(p, (contribs, _))| PixelCache {
            contribs,
            pseudo: Vec3::new(pseudo.data[3 * p], pseudo.data[3 * p + 1], pseudo.data[3 * p + 2]),
        })
        .collect();
    ViewCache { pixels }
}

fn build_views(scene: &GaussianScene, render: &RenderConfig) -> Vec<ViewCache> {
    scene
        .cameras
        .iter()
        .map(|c| build_view(scene, c, render))
        .collect()
}

#[inline]
fn pixel_loss(n: &Vec3, pseudo: &Vec3) -> f64 {
    if *n == Vec3::zeros() || *pseudo == Vec3::zeros() {
        0.0
    } else {
        1.0 - n.dot(pseudo)
    }
}

fn composited_normal(px: &PixelCache, normals: &[Vec3]) -> Vec3 {
    px.contribs
        .iter()
        .fold(Vec3::zeros(), |acc, &(i, w)| acc + normals[i as usize] * w)
}

/// (sum of per-pixel losses, number of contributing pixels)
fn views_loss(views: &[&ViewCache], normals: &[Vec3]) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0;
    for v in views {
        for px in &v.pixels {
            let n = composited_normal(px, normals);
            if n != Vec3::zeros() && px.pseudo != Vec3::zeros() {
                sum += 1.0 - n.dot(&px.pseudo);
                count += 1;
            }
        }
    }
    (sum, count)
}

fn mean_loss(views: &[ViewCache], normals: &[Vec3]) -> f64 {
    let refs: Vec<&ViewCache> = views.iter().collect();
    let (sum, count) = views_loss(&refs, normals);
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

fn current_normals(scene: &GaussianScene) -> Vec<Vec3> {
    scene.gaussians().iter().map(|g| g.oriented_normal()).collect()
}

fn errors_from_views(views: &[ViewCache], normals: &[Vec3]) -> Vec<f64> {
    let mut err = vec![0.0; normals.len()];
    let mut mass = vec![0.0; normals.len()];
    for v in views {
        for px in &v.pixels {
            let l = pixel_loss(&composited_normal(px, normals), &px.pseudo);
            for &(i, w) in &px.contribs {
                err[i as usize] += w * l;
                mass[i as usize] += w;
            }
        }
    }
    err.iter()
        .zip(&mass)
        .map(|(e, m)| if *m > 0.0 { (e / m).max(0.0) } else { 0.0 })
        .collect()
}

/// Blend-weighted alignment error of every Gaussian over `cameras`.
pub fn per_gaussian_error(scene: &GaussianScene, cameras: &[PinholeCamera], render: &RenderConfig) -> Vec<f64> {
    let views: Vec<ViewCache> = cameras.iter().map(|c| build_view(scene, c, render)).collect();
    errors_from_views(&views, &current_normals(scene))
}

/// Gaussians with blend weight above `min_weight` in at least one pixel of
/// any scene camera.
pub fn visible_gaussians(scene: &GaussianScene, render: &RenderConfig, min_weight: f64) -> Vec<bool> {
    let mut seen = vec![false; scene.len()];
    for v in build_views(scene, render) {
        for px in &v.pixels {
            for &(i, w) in &px.contribs {
                if w > min_weight {
                    seen[i as usize] = true;
                }
            }
        }
    }
    seen
}

/// Clones the top `fraction` of Gaussians by error with negated
/// `normal_sign`. Ties go to the lower index.
pub fn densify_flip(scene: &mut GaussianScene, errors: &[f64], fraction: f64) -> usize {
    assert!(fraction > 0.0 && fraction <= 0.5, "fraction must lie in (0, 0.5]");
    assert_eq!(errors.len(), scene.len(), "one error per Gaussian");
    let n = scene.len();
    if n == 0 {
        return 0;
    }
    let count = ((fraction * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| errors[b].total_cmp(&errors[a]).then(a.cmp(&b)));
    let clones: Vec<_> = order[..count]
        .iter()
        .map(|&i| scene.gaussians()[i].flipped())
        .collect();
    scene.append(clones);
    count
}

/// Finite-difference gradient of `loss_weight · Σ_views Σ_p ℓ(p)` with
/// respect to each Gaussian's `(normal_sign, normal_dir)`. Gaussians
/// without a touched pixel get zeros.
pub fn orientation_gradients(
    scene: &GaussianScene,
    cameras: &[usize],
    config: &WrapConfig,
) -> Vec<(f64, Vec3)> {
    let views: Vec<ViewCache> = cameras
        .iter()
        .map(|&c| build_view(scene, &scene.cameras[c], &config.render))
        .collect();
    let refs: Vec<&ViewCache> = views.iter().collect();
    gradients(scene, &refs, &current_normals(scene), config)
}

fn gradients(
    scene: &GaussianScene,
    views: &[&ViewCache],
    normals: &[Vec3],
    config: &WrapConfig,
) -> Vec<(f64, Vec3)> {
    let n = scene.len();
    // Flatten the step's pixels and record which ones each Gaussian touches.
    let pixels: Vec<&PixelCache> = views
        .iter()
        .flat_map(|v| v.pixels.iter())
        .filter(|p| p.pseudo != Vec3::zeros())
        .collect();
    let composited: Vec<Vec3> = pixels.iter().map(|p| composited_normal(p, normals)).collect();
    let mut touched: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for (k, px) in pixels.iter().enumerate() {
        for &(i, w) in &px.contribs {
            if w > config.min_weight {
                touched[i as usize].push((k as u32, w));
            }
        }
    }
    let h = config.fd_step;
    let lambda = config.loss_weight;
    let gaussians = scene.gaussians();
    touched
        .par_iter()
        .enumerate()
        .map(|(i, list)| {
            if list.is_empty() {
                return (0.0, Vec3::zeros());
            }
            let g = &gaussians[i];
            let base = normals[i];
            let partial = |candidate: Vec3| -> f64 {
                let delta = candidate - base;
                list.iter()
                    .map(|&(k, w)| {
                        let px = pixels[k as usize];
                        pixel_loss(&(composited[k as usize] + delta * w), &px.pseudo)
                    })
                    .sum::<f64>()
            };
            let (s, d) = (g.normal_sign, g.normal_dir);
            let gs = (partial(oriented_normal_of(s + h, &d)) - partial(oriented_normal_of(s - h, &d))) / (2.0 * h);
            let mut gd = Vec3::zeros();
            for a in 0..3 {
                let mut dp = d;
                let mut dm = d;
                dp[a] += h;
                dm[a] -= h;
                gd[a] = (partial(oriented_normal_of(s, &dp)) - partial(oriented_normal_of(s, &dm))) / (2.0 * h);
            }
            (lambda * gs, gd * lambda)
        })
        .collect()
}

/// Gradient descent on the orientation parameters. Geometry, opacity and
/// color are left untouched; clones are appended when densification is on.
pub fn optimize_normals(
    mut scene: GaussianScene,
    config: &WrapConfig,
) -> Result<(GaussianScene, WrapReport), WrapError> {
    config.validate()?;
    let mut report = WrapReport::default();
    if config.iterations == 0 {
        report.errors = vec![0.0; scene.len()];
        return Ok((scene, report));
    }
    if scene.cameras.is_empty() {
        return Err(WrapError::NoCameras);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut views = build_views(&scene, &config.render);
    let mut normals = current_normals(&scene);
    let initial = mean_loss(&views, &normals);
    report.initial_loss = initial;
    let n_cams = scene.cameras.len();
    let per_step = config.views_per_step.min(n_cams);

    for it in 0..config.iterations {
        let chosen = rand::seq::index::sample(&mut rng, n_cams, per_step).into_vec();
        let refs: Vec<&ViewCache> = chosen.iter().map(|&c| &views[c]).collect();
        let grads = gradients(&scene, &refs, &normals, config);
        for (i, (gs, gd)) in grads.into_iter().enumerate() {
            if gs == 0.0 && gd == Vec3::zeros() {
                continue;
            }
            let g = &scene.gaussians()[i];
            let sign = g.normal_sign - config.learning_rate * gs;
            let dir = g.normal_dir - gd * config.dir_learning_rate;
            let norm = dir.norm();
            let dir = if norm > 0.0 && norm.is_finite() { dir / norm } else { g.normal_dir };
            scene.set_normal_params(i, sign, dir);
            normals[i] = scene.gaussians()[i].oriented_normal();
        }
        let loss = mean_loss(&views, &normals);
        if !loss.is_finite() || (initial > 0.0 && loss > 4.0 * initial) {
            return Err(WrapError::Diverged {
                iteration: it,
                loss,
                initial,
            });
        }
        report.loss_trace.push(loss);
        log::debug!("wrap iteration {it}: loss {loss:.6}");

        let done = it + 1;
        if config.densify && done % config.densify_every == 0 && done < config.iterations {
            let errors = errors_from_views(&views, &normals);
            let added = densify_flip(&mut scene, &errors, config.densify_fraction);
            report.densify_events.push(DensifyEvent {
                iteration: done,
                clones_added: added,
            });
            views = build_views(&scene, &config.render);
            normals = current_normals(&scene);
        }
    }
    report.errors = errors_from_views(&views, &normals);
    Ok((scene, report))
}
