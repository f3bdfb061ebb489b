use crate::camera::PinholeCamera;
use crate::gaussian::{OrientedGaussian, DEFAULT_SUPPORT_SIGMA};
use crate::math::{Aabb, Vec3};
use crate::spatial::{Bvh, KdTree, Neighbor};

/// A set of oriented Gaussians, the training cameras, and the acceleration
/// structures built over them.
///
/// Geometry (means, scales, rotations) is immutable once the scene is built;
/// orientation parameters can be edited in place because no index depends on
/// them. Appending Gaussians rebuilds the indexes.
#[derive(Clone, Debug)]
pub struct GaussianScene {
    gaussians: Vec<OrientedGaussian>,
    pub cameras: Vec<PinholeCamera>,
    support_sigma: f64,
    means: KdTree,
    supports: Bvh,
    bbox: Aabb,
    max_scale: f64,
}

impl GaussianScene {
    pub fn new(gaussians: Vec<OrientedGaussian>, cameras: Vec<PinholeCamera>) -> Self {
        Self::with_support_sigma(gaussians, cameras, DEFAULT_SUPPORT_SIGMA)
    }

    pub fn with_support_sigma(
        gaussians: Vec<OrientedGaussian>,
        cameras: Vec<PinholeCamera>,
        support_sigma: f64,
    ) -> Self {
        assert!(support_sigma > 0.0, "support radius must be positive");
        let mut scene = Self {
            gaussians,
            cameras,
            support_sigma,
            means: KdTree::build(&[]),
            supports: Bvh::default(),
            bbox: Aabb::empty(),
            max_scale: 0.0,
        };
        scene.reindex();
        scene
    }

    fn reindex(&mut self) {
        let means: Vec<Vec3> = self.gaussians.iter().map(|g| g.mean).collect();
        self.means = KdTree::build(&means);
        let boxes: Vec<Aabb> = self
            .gaussians
            .iter()
            .map(|g| g.support_aabb(self.support_sigma))
            .collect();
        self.supports = Bvh::build(&boxes);
        self.max_scale = self
            .gaussians
            .iter()
            .map(OrientedGaussian::max_scale)
            .fold(0.0, f64::max);
        self.bbox = Aabb::from_points(&means).padded(3.0 * self.max_scale);
    }

    pub fn gaussians(&self) -> &[OrientedGaussian] {
        &self.gaussians
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    pub fn support_sigma(&self) -> f64 {
        self.support_sigma
    }

    /// Bounds of all means padded by three times the largest scale.
    pub fn bbox(&self) -> Aabb {
        self.bbox
    }

    pub fn max_scale(&self) -> f64 {
        self.max_scale
    }

    pub fn min_scale(&self) -> f64 {
        self.gaussians
            .iter()
            .map(OrientedGaussian::min_scale)
            .fold(f64::INFINITY, f64::min)
    }

    /// Updates the orientation parameters of one Gaussian.
    pub fn set_normal_params(&mut self, index: usize, sign: f64, dir: Vec3) {
        self.gaussians[index].set_normal_params(sign, dir);
    }

    pub fn append(&mut self, more: impl IntoIterator<Item = OrientedGaussian>) {
        self.gaussians.extend(more);
        self.reindex();
    }

    pub fn into_parts(self) -> (Vec<OrientedGaussian>, Vec<PinholeCamera>) {
        (self.gaussians, self.cameras)
    }

    /// `k` nearest Gaussians by mean distance.
    pub fn nearest_means(&self, x: &Vec3, k: usize) -> Vec<Neighbor> {
        self.means.knn(x, k)
    }

    /// Whether `x` lies inside the truncated support of Gaussian `i`.
    #[inline]
    pub fn supports(&self, i: usize, x: &Vec3) -> bool {
        self.gaussians[i].mahalanobis_sq(x) <= self.support_sigma * self.support_sigma
    }

    /// Indices of Gaussians whose truncated support contains `x`, ascending.
    pub fn supporting(&self, x: &Vec3) -> Vec<usize> {
        let mut out = Vec::new();
        self.supports.for_each_containing(x, |i| {
            if self.supports(i, x) {
                out.push(i);
            }
        });
        out.sort_unstable();
        out
    }

    /// Calls `f(i, t_enter, t_exit)` for each Gaussian whose support
    /// ellipsoid meets the ray within `[0, t_max]`. The interval is the
    /// unclipped intersection with the ellipsoid.
    pub fn for_each_support_on_ray(
        &self,
        origin: &Vec3,
        dir: &Vec3,
        t_max: f64,
        mut f: impl FnMut(usize, f64, f64),
    ) {
        let k2 = self.support_sigma * self.support_sigma;
        self.supports.for_each_on_ray(origin, dir, 0.0, t_max, |i| {
            if let Some((t0, t1)) = ellipsoid_interval(&self.gaussians[i], origin, dir, k2) {
                if t1 >= 0.0 && t0 <= t_max {
                    f(i, t0, t1);
                }
            }
        });
    }
}

/// Parametric interval where `(o + t w - μ)ᵀ Σ⁻¹ (o + t w - μ) ≤ k2`.
pub fn ellipsoid_interval(
    g: &OrientedGaussian,
    origin: &Vec3,
    dir: &Vec3,
    k2: f64,
) -> Option<(f64, f64)> {
    let p = g.precision();
    let d = origin - g.mean;
    let pw = p * dir;
    let a = dir.dot(&pw);
    let b = d.dot(&pw);
    let c = d.dot(&(p * d)) - k2;
    let disc = b * b - a * c;
    if disc < 0.0 || a <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some(((-b - s) / a, (-b + s) / a))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blob(x: f64, sigma: f64) -> OrientedGaussian {
        OrientedGaussian::isotropic(Vec3::new(x, 0.0, 0.0), sigma, 0.5, Vec3::z()).unwrap()
    }

    #[test]
    fn bbox_contains_means_with_padding() {
        let scene = GaussianScene::new(vec![blob(0.0, 0.1), blob(2.0, 0.2)], vec![]);
        let bb = scene.bbox();
        for g in scene.gaussians() {
            assert!(bb.contains(&g.mean));
        }
        assert!((bb.max[0] - 2.6).abs() < 1e-12);
    }

    #[test]
    fn ray_support_interval_for_isotropic_blob() {
        let scene = GaussianScene::new(vec![blob(5.0, 0.5)], vec![]);
        let mut seen = Vec::new();
        scene.for_each_support_on_ray(&Vec3::zeros(), &Vec3::x(), 100.0, |i, t0, t1| {
            seen.push((i, t0, t1))
        });
        assert_eq!(seen.len(), 1);
        assert!((seen[0].1 - 3.0).abs() < 1e-12 && (seen[0].2 - 7.0).abs() < 1e-12);
    }

    #[test]
    fn supporting_respects_cutoff() {
        let scene = GaussianScene::new(vec![blob(0.0, 0.1), blob(1.0, 0.1)], vec![]);
        assert_eq!(scene.supporting(&Vec3::new(0.39, 0.0, 0.0)), vec![0]);
        assert!(scene.supporting(&Vec3::new(0.5, 0.0, 0.0)).is_empty());
    }
}
