//! Mesh evaluation: point-cloud extraction protocols, Chamfer distance and
//! F1 at a threshold, and the tessellation-bias experiment.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::PinholeCamera;
use crate::math::{sample_triangle, Aabb, Vec3};
use crate::mesh::TriangleMesh;
use crate::rng::stream_rng;
use crate::spatial::{Bvh, KdTree};

/// Default number of points drawn by uniform sampling.
pub const DEFAULT_UNIFORM_COUNT: usize = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("mesh has no faces")]
    EmptyMesh,
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("mesh has no area inside the crop box")]
    CropEmpty,
    #[error("no cameras given")]
    NoCameras,
    #[error("tau must be positive, got {0}")]
    BadTau(f64),
    #[error("non-finite point at index {0}")]
    NonFinite(usize),
    #[error("point {0} lies outside the crop box")]
    OutsideCrop(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Legacy,
    Uniform,
    VirtualScan,
}

impl std::str::FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "legacy" => Ok(Self::Legacy),
            "uniform" => Ok(Self::Uniform),
            "virtual" | "virtual_scan" => Ok(Self::VirtualScan),
            other => Err(format!("unknown protocol {other:?}")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub crop: Option<Aabb>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, crop: Option<Aabb>) -> Result<Self, EvalError> {
        for (i, p) in points.iter().enumerate() {
            if !p.iter().all(|c| c.is_finite()) {
                return Err(EvalError::NonFinite(i));
            }
            if let Some(b) = &crop {
                if !b.contains(p) {
                    return Err(EvalError::OutsideCrop(i));
                }
            }
        }
        Ok(Self { points, crop })
    }

    /// Keeps only points inside `crop` (if any) and records the box.
    pub fn cropped(points: Vec<Vec3>, crop: Option<Aabb>) -> Self {
        let points = match &crop {
            Some(b) => points.into_iter().filter(|p| b.contains(p)).collect(),
            None => points,
        };
        Self { points, crop }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::from_points(&self.points)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub protocol: Option<Protocol>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub chamfer: f64,
    pub tau: f64,
    pub pred_points: usize,
    pub gt_points: usize,
}

impl EvalResult {
    pub fn tagged(mut self, protocol: Protocol) -> Self {
        self.protocol = Some(protocol);
        self
    }
}

pub fn harmonic_f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

/// One percent of the diagonal of the ground-truth crop box, or of its
/// bounding box when uncropped.
pub fn default_tau(gt: &PointCloud) -> f64 {
    0.01 * gt.crop.unwrap_or_else(|| gt.bbox()).diagonal()
}

/// `count` area-uniform points on `mesh`. Points outside `crop` are
/// redrawn, up to `100 × count` draws in total.
pub fn uniform_sample(
    mesh: &TriangleMesh,
    count: usize,
    crop: Option<Aabb>,
    seed: u64,
) -> Result<PointCloud, EvalError> {
    if mesh.is_empty() {
        return Err(EvalError::EmptyMesh);
    }
    let areas: Vec<f64> = (0..mesh.faces.len()).map(|f| mesh.face_area(f)).collect();
    let pick = WeightedIndex::new(&areas).map_err(|_| EvalError::EmptyMesh)?;
    let mut rng = stream_rng(seed, 0x5a11);
    let budget = count.saturating_mul(100);
    let mut points = Vec::with_capacity(count);
    let mut draws = 0;
    while points.len() < count && draws < budget {
        draws += 1;
        let [a, b, c] = mesh.corners(pick.sample(&mut rng));
        let p = sample_triangle(&a, &b, &c, rng.random(), rng.random());
        if crop.is_none_or(|bx| bx.contains(&p)) {
            points.push(p);
        }
    }
    if points.is_empty() && count > 0 {
        return Err(EvalError::CropEmpty);
    }
    if points.len() < count {
        log::warn!("uniform sampling kept {} of {count} points inside the crop", points.len());
    }
    Ok(PointCloud { points, crop })
}

/// All vertices followed by all face centroids, cropped.
pub fn legacy_point_cloud(mesh: &TriangleMesh, crop: Option<Aabb>) -> Result<PointCloud, EvalError> {
    if mesh.is_empty() {
        return Err(EvalError::EmptyMesh);
    }
    let mut points = mesh.vertices.clone();
    points.extend((0..mesh.faces.len()).map(|f| mesh.face_centroid(f)));
    Ok(PointCloud::cropped(points, crop))
}

/// Moller-Trumbore; hit distance along `dir` if within `(1e-12, t_max)`.
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, [a, b, c]: [Vec3; 3], t_max: f64) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-18 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - a;
    let u = s.dot(&p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&q) * inv;
    (t > 1e-12 && t < t_max).then_some(t)
}

fn triangle_boxes(mesh: &TriangleMesh) -> Vec<Aabb> {
    (0..mesh.faces.len())
        .map(|f| Aabb::from_points(&mesh.corners(f)))
        .collect()
}

/// First-hit depth scan of `mesh` from every camera at its own resolution,
/// back-projected through pixel centers and cropped.
pub fn virtual_scan(
    mesh: &TriangleMesh,
    cameras: &[PinholeCamera],
    crop: Option<Aabb>,
) -> Result<PointCloud, EvalError> {
    if mesh.is_empty() {
        return Err(EvalError::EmptyMesh);
    }
    if cameras.is_empty() {
        return Err(EvalError::NoCameras);
    }
    let bvh = Bvh::build(&triangle_boxes(mesh));
    let points: Vec<Vec3> = cameras
        .par_iter()
        .flat_map_iter(|cam| {
            let bvh = &bvh;
            (0..cam.height).flat_map(move |py| {
                (0..cam.width).filter_map(move |px| {
                    let ray = cam.pixel_ray(px, py);
                    bvh.closest_hit(&ray.origin, &ray.dir, f64::INFINITY, |f, t_max| {
                        ray_triangle(&ray.origin, &ray.dir, mesh.corners(f), t_max)
                    })
                    .map(|(_, t)| ray.at(t))
                })
            })
        })
        .collect();
    Ok(PointCloud::cropped(points, crop))
}

fn nearest_distances(from: &[Vec3], to: &KdTree) -> Vec<f64> {
    from.par_iter()
        .map(|p| to.nearest(p).map_or(f64::INFINITY, |n| n.dist_sq.sqrt()))
        .collect()
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Symmetric Chamfer distance: the average of the two directed mean
/// nearest-neighbor distances.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> Result<f64, EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::EmptyCloud);
    }
    let ta = KdTree::build(&a.points);
    let tb = KdTree::build(&b.points);
    Ok(0.5 * (mean(&nearest_distances(&a.points, &tb)) + mean(&nearest_distances(&b.points, &ta))))
}

/// Precision, recall and F1 of `pred` against `gt` at threshold `tau`. The
/// Chamfer distance falls out of the same queries.
pub fn f1_at(pred: &PointCloud, gt: &PointCloud, tau: f64) -> Result<EvalResult, EvalError> {
    if pred.is_empty() || gt.is_empty() {
        return Err(EvalError::EmptyCloud);
    }
    if !(tau > 0.0) {
        return Err(EvalError::BadTau(tau));
    }
    let tp = KdTree::build(&pred.points);
    let tg = KdTree::build(&gt.points);
    let d_pred = nearest_distances(&pred.points, &tg);
    let d_gt = nearest_distances(&gt.points, &tp);
    let frac = |d: &[f64]| d.iter().filter(|&&x| x <= tau).count() as f64 / d.len() as f64;
    let precision = frac(&d_pred);
    let recall = frac(&d_gt);
    Ok(EvalResult {
        protocol: None,
        precision,
        recall,
        f1: harmonic_f1(precision, recall),
        chamfer: 0.5 * (mean(&d_pred) + mean(&d_gt)),
        tau,
        pred_points: pred.len(),
        gt_points: gt.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub uniform_count: usize,
    pub seed: u64,
    /// `None` uses [`default_tau`].
    pub tau: Option<f64>,
    pub crop: Option<Aabb>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            uniform_count: DEFAULT_UNIFORM_COUNT,
            seed: 0,
            tau: None,
            crop: None,
        }
    }
}

/// Extracts the predicted cloud with `protocol` and scores it.
pub fn evaluate_mesh(
    mesh: &TriangleMesh,
    gt: &PointCloud,
    protocol: Protocol,
    cameras: &[PinholeCamera],
    config: &EvalConfig,
) -> Result<EvalResult, EvalError> {
    let crop = config.crop.or(gt.crop);
    let pred = match protocol {
        Protocol::Legacy => legacy_point_cloud(mesh, crop)?,
        Protocol::Uniform => uniform_sample(mesh, config.uniform_count, crop, config.seed)?,
        Protocol::VirtualScan => virtual_scan(mesh, cameras, crop)?,
    };
    let tau = config.tau.unwrap_or_else(|| default_tau(gt));
    Ok(f1_at(&pred, gt, tau)?.tagged(protocol))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub tau: f64,
    pub legacy_before: EvalResult,
    pub legacy_after: EvalResult,
    pub uniform_before: EvalResult,
    pub uniform_after: EvalResult,
    pub legacy_delta: f64,
    pub uniform_delta: f64,
    /// `|uniform_delta| < 0.01`.
    pub uniform_stable: bool,
}

/// Scores `mesh` and its 1-to-4 midpoint subdivision with the legacy and
/// uniform protocols.
pub fn bias_experiment(
    mesh: &TriangleMesh,
    gt: &PointCloud,
    tau: f64,
    uniform_count: usize,
    seed: u64,
) -> Result<BiasReport, EvalError> {
    let fine = mesh.subdivided();
    let config = EvalConfig {
        uniform_count,
        seed,
        tau: Some(tau),
        crop: gt.crop,
    };
    let run = |m: &TriangleMesh, p| evaluate_mesh(m, gt, p, &[], &config);
    let legacy_before = run(mesh, Protocol::Legacy)?;
    let legacy_after = run(&fine, Protocol::Legacy)?;
    let uniform_before = run(mesh, Protocol::Uniform)?;
    let uniform_after = run(&fine, Protocol::Uniform)?;
    let legacy_delta = legacy_after.f1 - legacy_before.f1;
    let uniform_delta = uniform_after.f1 - uniform_before.f1;
    Ok(BiasReport {
        tau,
        legacy_before,
        legacy_after,
        uniform_before,
        uniform_after,
        legacy_delta,
        uniform_delta,
        uniform_stable: uniform_delta.abs() < 0.01,
    })
}

/// Closest point on triangle `abc` to `p`.
pub fn closest_point_on_triangle(p: &Vec3, [a, b, c]: [Vec3; 3]) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        return a + ab * (d1 / (d1 - d3));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        return a + ac * (d2 / (d2 - d6));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));
    }
    let denom = 1.0 / (va + vb + vc);
    a + ab * (vb * denom) + ac * (vc * denom)
}

/// Exact point-to-surface distance queries against a fixed mesh.
pub struct MeshDistance<'a> {
    mesh: &'a TriangleMesh,
    bvh: Bvh,
}

impl<'a> MeshDistance<'a> {
    pub fn new(mesh: &'a TriangleMesh) -> Self {
        Self {
            mesh,
            bvh: Bvh::build(&triangle_boxes(mesh)),
        }
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        self.bvh
            .nearest(p, |f, _| (closest_point_on_triangle(p, self.mesh.corners(f)) - p).norm())
            .map_or(f64::INFINITY, |(_, d)| d)
    }
}
