//! Closed-form geometric fields of an oriented-Gaussian scene.
//!
//! Transmittance along a ray is `T(t) = ∏ᵢ (1 - Gᵢ(o + min(t, tᵢ*) w))`,
//! where `tᵢ*` is the point of maximum contribution of Gaussian `i`. The
//! vector field `V = Σ 𝟙[nᵢᵀ(x-μᵢ) ≥ 0] ∇log(1 - Gᵢ)` is the gradient of the
//! log-vacancy for a wrapped scene; the vacancy itself is estimated from
//! below by the best transmittance over the training cameras.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::Ray;
use crate::gaussian::OrientedGaussian;
use crate::math::Vec3;
use crate::scene::GaussianScene;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("vacancy queries need at least one camera")]
    NoCameras,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    /// Nearest Gaussians consulted by the vector and normal fields.
    pub k_neighbors: usize,
    /// Below this norm the normal field is zero.
    pub vector_zero_eps: f64,
    /// Use a fixed random subset of this many cameras for vacancy queries.
    pub vacancy_camera_subset: Option<usize>,
    pub seed: u64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self {
            k_neighbors: 32,
            vector_zero_eps: 1e-8,
            vacancy_camera_subset: None,
            seed: 0,
        }
    }
}

/// Everything the field module knows about one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample {
    pub vacancy: f64,
    pub occupancy: f64,
    pub vector: Vec3,
    pub normal: Vec3,
    pub support_count: usize,
}

/// Clamped minimizer of the Mahalanobis quadratic along the ray.
#[inline]
pub fn max_contribution_t(ray: &Ray, g: &OrientedGaussian) -> f64 {
    let pw = g.precision() * ray.dir;
    let num = (g.mean - ray.origin).dot(&pw);
    let den = ray.dir.dot(&pw);
    (num / den).max(0.0)
}

/// Transmittance from the ray origin to distance `t`.
pub fn transmittance(scene: &GaussianScene, ray: &Ray, t: f64) -> f64 {
    log_transmittance_floor(scene, ray, t, f64::NEG_INFINITY).exp()
}

/// Log-transmittance, accumulated in log space. Stops early and returns a
/// value `< floor` once the running sum falls below `floor`.
pub(crate) fn log_transmittance_floor(
    scene: &GaussianScene,
    ray: &Ray,
    t: f64,
    floor: f64,
) -> f64 {
    let gaussians = scene.gaussians();
    let mut hits: Vec<(usize, f64)> = Vec::new();
    scene.for_each_support_on_ray(&ray.origin, &ray.dir, t, |i, t0, _| hits.push((i, t0)));
    if floor > f64::NEG_INFINITY {
        // Near Gaussians first so the floor test can fire early.
        hits.sort_unstable_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    } else {
        hits.sort_unstable_by_key(|h| h.0);
    }
    let mut log_t = 0.0;
    for (i, _) in hits {
        let g = &gaussians[i];
        let ts = max_contribution_t(ray, g);
        let value = g.eval(&ray.at(t.min(ts)));
        log_t += (-value).ln_1p();
        if log_t < floor {
            return log_t;
        }
    }
    log_t
}

/// Unoriented, view-dependent attenuation `Σ max(0, -w·∇log(1-Gᵢ))`.
pub fn attenuation(scene: &GaussianScene, x: &Vec3, w: &Vec3) -> f64 {
    scene
        .supporting(x)
        .into_iter()
        .map(|i| (-w.dot(&scene.gaussians()[i].grad_log_one_minus(x))).max(0.0))
        .sum()
}

/// Reciprocal attenuation `Σ 𝟙[nᵢᵀ(x-μᵢ) ≥ 0] |w·∇log(1-Gᵢ)|`.
pub fn oriented_attenuation(scene: &GaussianScene, x: &Vec3, w: &Vec3) -> f64 {
    scene
        .supporting(x)
        .into_iter()
        .filter(|&i| scene.gaussians()[i].on_positive_side(x))
        .map(|i| w.dot(&scene.gaussians()[i].grad_log_one_minus(x)).abs())
        .sum()
}

/// Gaussian vector field over the `k` nearest Gaussians, plus the number of
/// Gaussians that contributed.
pub fn vector_field_counted(scene: &GaussianScene, x: &Vec3, k: usize) -> (Vec3, usize) {
    assert!(k >= 1, "vector field needs at least one neighbor");
    let mut idx: Vec<usize> = scene
        .nearest_means(x, k)
        .into_iter()
        .map(|n| n.index)
        .collect();
    idx.sort_unstable();
    let mut v = Vec3::zeros();
    let mut count = 0;
    for i in idx {
        let g = &scene.gaussians()[i];
        if scene.supports(i, x) && g.on_positive_side(x) {
            v += g.grad_log_one_minus(x);
            count += 1;
        }
    }
    (v, count)
}

pub fn vector_field(scene: &GaussianScene, x: &Vec3, k: usize) -> Vec3 {
    vector_field_counted(scene, x, k).0
}

/// Normalizes a vector-field value, or zero below `eps`.
pub fn normalize_field(v: &Vec3, eps: f64) -> Vec3 {
    let n = v.norm();
    if n < eps {
        Vec3::zeros()
    } else {
        v / n
    }
}

pub fn normal_field(scene: &GaussianScene, x: &Vec3, k: usize, eps: f64) -> Vec3 {
    normalize_field(&vector_field(scene, x, k), eps)
}

/// Cameras consulted by vacancy queries under `config`.
pub fn vacancy_cameras(scene: &GaussianScene, config: &FieldConfig) -> Vec<usize> {
    let n = scene.cameras.len();
    match config.vacancy_camera_subset {
        Some(m) if m < n => {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let mut picked = sample(&mut rng, n, m).into_vec();
            picked.sort_unstable();
            picked
        }
        _ => (0..n).collect(),
    }
}

/// Lower bound on the vacancy: best transmittance from any camera center
/// to `x`.
pub fn vacancy_lower_bound(scene: &GaussianScene, x: &Vec3) -> Result<f64, FieldError> {
    let all: Vec<usize> = (0..scene.cameras.len()).collect();
    vacancy_with_cameras(scene, x, &all)
}

pub fn vacancy_with_cameras(
    scene: &GaussianScene,
    x: &Vec3,
    cameras: &[usize],
) -> Result<f64, FieldError> {
    best_camera(scene, x, cameras).map(|(_, v)| v)
}

/// Index of the least obstructed camera and its transmittance to `x`.
pub fn best_camera(
    scene: &GaussianScene,
    x: &Vec3,
    cameras: &[usize],
) -> Result<(usize, f64), FieldError> {
    best_camera_hinted(scene, x, cameras, None)
}

/// As [`best_camera`], trying camera `hint` first. A good hint lets the
/// remaining rays stop early.
pub fn best_camera_hinted(
    scene: &GaussianScene,
    x: &Vec3,
    cameras: &[usize],
    hint: Option<usize>,
) -> Result<(usize, f64), FieldError> {
    if cameras.is_empty() {
        return Err(FieldError::NoCameras);
    }
    let mut best_log = f64::NEG_INFINITY;
    let mut best = cameras[0];
    let first = hint.filter(|h| cameras.contains(h));
    let order = first
        .into_iter()
        .chain(cameras.iter().copied().filter(|&c| Some(c) != first));
    for c in order {
        let center = scene.cameras[c].center();
        let d = x - center;
        let len = d.norm();
        if len == 0.0 {
            return Ok((c, 1.0));
        }
        let ray = Ray {
            origin: center,
            dir: d / len,
        };
        let log_t = log_transmittance_floor(scene, &ray, len, best_log);
        if log_t > best_log {
            best_log = log_t;
            best = c;
            if best_log == 0.0 {
                break;
            }
        }
    }
    Ok((best, best_log.exp()))
}

/// Field evaluator bound to a scene and a configuration.
#[derive(Clone, Debug)]
pub struct Fields<'a> {
    pub scene: &'a GaussianScene,
    pub config: FieldConfig,
    cameras: Vec<usize>,
}

impl<'a> Fields<'a> {
    pub fn new(scene: &'a GaussianScene, config: FieldConfig) -> Self {
        let cameras = vacancy_cameras(scene, &config);
        Self {
            scene,
            config,
            cameras,
        }
    }

    pub fn vacancy(&self, x: &Vec3) -> Result<f64, FieldError> {
        vacancy_with_cameras(self.scene, x, &self.cameras)
    }

    /// Best camera and vacancy at `x`, trying `hint` first.
    pub fn vacancy_hinted(&self, x: &Vec3, hint: Option<usize>) -> Result<(usize, f64), FieldError> {
        best_camera_hinted(self.scene, x, &self.cameras, hint)
    }

    /// Whether the vacancy at `x` exceeds `level`, and the camera that
    /// showed it. Cheaper than [`Fields::vacancy`]: each ray stops once its
    /// transmittance falls below `level`, and the first clear camera ends
    /// the search.
    pub fn vacancy_exceeds(&self, x: &Vec3, level: f64, hint: Option<usize>) -> Result<(bool, Option<usize>), FieldError> {
        if self.cameras.is_empty() {
            return Err(FieldError::NoCameras);
        }
        let floor = level.ln();
        let first = hint.filter(|h| self.cameras.contains(h));
        let order = first
            .into_iter()
            .chain(self.cameras.iter().copied().filter(|&c| Some(c) != first));
        for c in order {
            let center = self.scene.cameras[c].center();
            let d = x - center;
            let len = d.norm();
            if len == 0.0 {
                return Ok((level < 1.0, Some(c)));
            }
            let ray = Ray {
                origin: center,
                dir: d / len,
            };
            if log_transmittance_floor(self.scene, &ray, len, floor) > floor {
                return Ok((true, Some(c)));
            }
        }
        Ok((false, None))
    }

    pub fn occupancy(&self, x: &Vec3) -> Result<f64, FieldError> {
        self.vacancy(x).map(|v| 1.0 - v)
    }

    pub fn vector(&self, x: &Vec3) -> Vec3 {
        vector_field(self.scene, x, self.config.k_neighbors)
    }

    pub fn normal(&self, x: &Vec3) -> Vec3 {
        normalize_field(&self.vector(x), self.config.vector_zero_eps)
    }

    pub fn sample(&self, x: &Vec3) -> Result<FieldSample, FieldError> {
        let vacancy = if self.scene.is_empty() {
            if self.cameras.is_empty() {
                return Err(FieldError::NoCameras);
            }
            1.0
        } else {
            self.vacancy(x)?
        };
        let (vector, support_count) =
            vector_field_counted(self.scene, x, self.config.k_neighbors);
        Ok(FieldSample {
            vacancy,
            occupancy: 1.0 - vacancy,
            vector,
            normal: normalize_field(&vector, self.config.vector_zero_eps),
            support_count,
        })
    }
}

pub fn field_sample(
    scene: &GaussianScene,
    x: &Vec3,
    config: &FieldConfig,
) -> Result<FieldSample, FieldError> {
    Fields::new(scene, config.clone()).sample(x)
}
