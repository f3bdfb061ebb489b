//! The oriented Gaussian primitive.
//!
//! A Gaussian is `G(x) = α exp(-½ (x-μ)ᵀ Σ⁻¹ (x-μ))` with `Σ = R diag(s²) Rᵀ`.
//! On top of the usual splatting parameters each primitive carries an
//! oriented normal stored as an unbounded sign parameter and a free
//! direction, read back as `tanh(sign) · dir / ‖dir‖`.

use nalgebra::{Quaternion, UnitQuaternion};
use thiserror::Error;

use crate::math::{Aabb, Mat3, Vec3};

/// Opacity clamp. Keeps `log(1 - G)` finite everywhere.
pub const ALPHA_MAX: f64 = 0.999;

/// Mahalanobis radius beyond which a Gaussian counts as exactly zero.
pub const DEFAULT_SUPPORT_SIGMA: f64 = 4.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CoreError {
    #[error("scales must be finite and strictly positive, got {0:?}")]
    BadScales([f64; 3]),
    #[error("rotation quaternion must be finite with nonzero norm, got {0:?}")]
    BadRotation([f64; 4]),
    #[error("opacity {opacity} outside [0, {alpha_max}]")]
    BadOpacity { opacity: f64, alpha_max: f64 },
    #[error("normal direction must be finite and nonzero, got {0:?}")]
    BadNormalDir([f64; 3]),
    #[error("non-finite parameter: {0}")]
    NonFinite(&'static str),
    #[error("oriented normal vanishes (‖n‖ < 1e-9)")]
    ZeroNormal,
}

/// Covariance and its inverse, both built from the factored form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Covariance {
    pub sigma: Mat3,
    pub precision: Mat3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrientedGaussian {
    pub mean: Vec3,
    scales: Vec3,
    rotation: UnitQuaternion<f64>,
    opacity: f64,
    pub normal_sign: f64,
    pub normal_dir: Vec3,
    pub color: Vec3,
    cov: Covariance,
}

impl OrientedGaussian {
    /// Builds a primitive, validating every invariant against `alpha_max`.
    ///
    /// The quaternion is taken as given when it is unit within 1e-9 and
    /// normalized otherwise, so file round trips stay bit-exact.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mean: Vec3,
        scales: Vec3,
        rotation: Quaternion<f64>,
        opacity: f64,
        normal_sign: f64,
        normal_dir: Vec3,
        color: Vec3,
        alpha_max: f64,
    ) -> Result<Self, CoreError> {
        if !mean.iter().all(|v| v.is_finite()) {
            return Err(CoreError::NonFinite("mean"));
        }
        if !scales.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(CoreError::BadScales([scales.x, scales.y, scales.z]));
        }
        let qn = rotation.norm();
        if !qn.is_finite() || qn == 0.0 {
            let c = rotation.coords;
            return Err(CoreError::BadRotation([c.w, c.x, c.y, c.z]));
        }
        let rotation = if (qn - 1.0).abs() <= 1e-9 {
            UnitQuaternion::new_unchecked(rotation)
        } else {
            UnitQuaternion::from_quaternion(rotation)
        };
        if !(opacity.is_finite() && (0.0..=alpha_max).contains(&opacity) && alpha_max < 1.0) {
            return Err(CoreError::BadOpacity { opacity, alpha_max });
        }
        if !normal_sign.is_finite() {
            return Err(CoreError::NonFinite("normal_sign"));
        }
        if !normal_dir.iter().all(|v| v.is_finite()) || normal_dir.norm() == 0.0 {
            return Err(CoreError::BadNormalDir([normal_dir.x, normal_dir.y, normal_dir.z]));
        }
        if !color.iter().all(|v| v.is_finite()) {
            return Err(CoreError::NonFinite("color"));
        }
        let cov = covariance_from(&scales, &rotation);
        Ok(Self {
            mean,
            scales,
            rotation,
            opacity,
            normal_sign,
            normal_dir,
            color,
            cov,
        })
    }

    /// Convenience constructor for an isotropic primitive with normal `n`.
    pub fn isotropic(mean: Vec3, sigma: f64, opacity: f64, normal: Vec3) -> Result<Self, CoreError> {
        Self::new(
            mean,
            Vec3::repeat(sigma),
            Quaternion::identity(),
            opacity,
            20.0,
            normal,
            Vec3::repeat(0.5),
            ALPHA_MAX,
        )
    }

    pub fn scales(&self) -> &Vec3 {
        &self.scales
    }

    pub fn rotation(&self) -> &UnitQuaternion<f64> {
        &self.rotation
    }

    pub fn opacity(&self) -> f64 {
        self.opacity
    }

    pub fn covariance(&self) -> &Covariance {
        &self.cov
    }

    pub fn precision(&self) -> &Mat3 {
        &self.cov.precision
    }

    pub fn max_scale(&self) -> f64 {
        self.scales.max()
    }

    pub fn min_scale(&self) -> f64 {
        self.scales.min()
    }

    /// Squared Mahalanobis distance of `x` to the mean.
    #[inline]
    pub fn mahalanobis_sq(&self, x: &Vec3) -> f64 {
        let d = x - self.mean;
        d.dot(&(self.cov.precision * d))
    }

    #[inline]
    pub fn eval(&self, x: &Vec3) -> f64 {
        self.opacity * (-0.5 * self.mahalanobis_sq(x)).exp()
    }

    /// `∇ log(1 - G(x)) = G/(1-G) · Σ⁻¹(x-μ)`.
    #[inline]
    pub fn grad_log_one_minus(&self, x: &Vec3) -> Vec3 {
        let d = x - self.mean;
        let pd = self.cov.precision * d;
        let g = self.opacity * (-0.5 * d.dot(&pd)).exp();
        pd * (g / (1.0 - g))
    }

    pub fn oriented_normal(&self) -> Vec3 {
        oriented_normal_of(self.normal_sign, &self.normal_dir)
    }

    /// Unit oriented normal, or `ZeroNormal` when `tanh(sign)` vanishes.
    pub fn unit_normal(&self) -> Result<Vec3, CoreError> {
        let n = self.oriented_normal();
        let len = n.norm();
        if len < 1e-9 {
            return Err(CoreError::ZeroNormal);
        }
        Ok(n / len)
    }

    /// Indicator of the half-space the oriented normal points into.
    #[inline]
    pub fn on_positive_side(&self, x: &Vec3) -> bool {
        self.oriented_normal().dot(&(x - self.mean)) >= 0.0
    }

    /// Ellipsoid extent along the unit oriented normal, `‖S Rᵀ n̂‖`.
    pub fn normal_scale_along(&self) -> Result<f64, CoreError> {
        let n = self.unit_normal()?;
        let local = self.rotation.inverse_transform_vector(&n);
        Ok(local.component_mul(&self.scales).norm())
    }

    /// Axis-aligned box of the ellipsoid at Mahalanobis radius `k`.
    pub fn support_aabb(&self, k: f64) -> Aabb {
        let s = &self.cov.sigma;
        let half = Vec3::new(s[(0, 0)].sqrt(), s[(1, 1)].sqrt(), s[(2, 2)].sqrt()) * k;
        Aabb::new(self.mean - half, self.mean + half)
    }

    /// Changes the orientation parameters; shape data is untouched.
    pub fn set_normal_params(&mut self, sign: f64, dir: Vec3) {
        self.normal_sign = sign;
        self.normal_dir = dir;
    }

    /// Copy of this primitive with the normal sign negated.
    pub fn flipped(&self) -> Self {
        let mut g = self.clone();
        g.normal_sign = -g.normal_sign;
        g
    }
}

/// `tanh(sign) · dir / ‖dir‖`.
pub fn oriented_normal_of(sign: f64, dir: &Vec3) -> Vec3 {
    dir * (sign.tanh() / dir.norm())
}

fn covariance_from(scales: &Vec3, rotation: &UnitQuaternion<f64>) -> Covariance {
    let r = rotation.to_rotation_matrix().into_inner();
    let s2 = Mat3::from_diagonal(&scales.component_mul(scales));
    let inv_s2 = Mat3::from_diagonal(&scales.map(|s| 1.0 / (s * s)));
    let sigma = r * s2 * r.transpose();
    let precision = r * inv_s2 * r.transpose();
    Covariance {
        sigma: symmetrize(sigma),
        precision: symmetrize(precision),
    }
}

fn symmetrize(m: Mat3) -> Mat3 {
    (m + m.transpose()) * 0.5
}
