use thiserror::Error;

use crate::math::{Mat3, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("focal lengths must be positive, got fx={fx} fy={fy}")]
    BadFocal { fx: f64, fy: f64 },
    #[error("principal point ({cx}, {cy}) outside the {width}x{height} image")]
    BadPrincipalPoint { cx: f64, cy: f64, width: u32, height: u32 },
    #[error("resolution must be at least 1x1")]
    EmptyImage,
    #[error("pose rotation is not orthonormal (error {0:e})")]
    NotOrthonormal(f64),
    #[error("non-finite camera parameter")]
    NonFinite,
    #[error("degenerate look-at (eye coincides with target or up is parallel to view)")]
    DegenerateLookAt,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub dir: Vec3,
}

impl Ray {
    /// Normalizes `dir`.
    pub fn new(origin: Vec3, dir: Vec3) -> Self {
        Self {
            origin,
            dir: dir.normalize(),
        }
    }

    /// Ray from `origin` heading to `target`, with the distance to it.
    pub fn towards(origin: Vec3, target: &Vec3) -> (Self, f64) {
        let d = target - origin;
        let len = d.norm();
        (Self { origin, dir: d / len }, len)
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.dir * t
    }
}

/// Rigid world-from-camera transform, stored as a raw matrix so that text
/// round trips are exact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Pose {
    pub fn new(rotation: Mat3, translation: Vec3) -> Result<Self, CameraError> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(CameraError::NonFinite);
        }
        let err = (rotation.transpose() * rotation - Mat3::identity()).amax();
        if err > 1e-9 || rotation.determinant() < 0.0 {
            return Err(CameraError::NotOrthonormal(err));
        }
        Ok(Self { rotation, translation })
    }
}

/// Pinhole camera looking down its local +z axis (x right, y down).
#[derive(Clone, Debug, PartialEq)]
pub struct PinholeCamera {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub pose: Pose,
}

impl PinholeCamera {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: u32,
        height: u32,
        pose: Pose,
    ) -> Result<Self, CameraError> {
        if ![fx, fy, cx, cy].iter().all(|v| v.is_finite()) {
            return Err(CameraError::NonFinite);
        }
        if fx <= 0.0 || fy <= 0.0 {
            return Err(CameraError::BadFocal { fx, fy });
        }
        if width == 0 || height == 0 {
            return Err(CameraError::EmptyImage);
        }
        if !(0.0..=width as f64).contains(&cx) || !(0.0..=height as f64).contains(&cy) {
            return Err(CameraError::BadPrincipalPoint { cx, cy, width, height });
        }
        Ok(Self { fx, fy, cx, cy, width, height, pose })
    }

    /// Camera at `eye` looking at `target`, with a horizontal field of view
    /// in degrees and centered principal point.
    pub fn look_at(
        eye: Vec3,
        target: Vec3,
        up: Vec3,
        fov_x_deg: f64,
        width: u32,
        height: u32,
    ) -> Result<Self, CameraError> {
        let forward = target - eye;
        if forward.norm() < 1e-12 {
            return Err(CameraError::DegenerateLookAt);
        }
        let z = forward.normalize();
        let x = z.cross(&up);
        if x.norm() < 1e-9 {
            return Err(CameraError::DegenerateLookAt);
        }
        let x = x.normalize();
        let y = z.cross(&x);
        let rotation = Mat3::from_columns(&[x, y, z]);
        let pose = Pose::new(rotation, eye)?;
        let fx = 0.5 * width as f64 / (0.5 * fov_x_deg.to_radians()).tan();
        Self::new(fx, fx, 0.5 * width as f64, 0.5 * height as f64, width, height, pose)
    }

    pub fn center(&self) -> Vec3 {
        self.pose.translation
    }

    pub fn forward(&self) -> Vec3 {
        self.pose.rotation.column(2).into_owned()
    }

    /// Unnormalized camera-space direction through pixel coordinates `(u, v)`.
    #[inline]
    pub fn camera_dir(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// World-space ray through the center of pixel `(px, py)`.
    pub fn pixel_ray(&self, px: u32, py: u32) -> Ray {
        let d = self.camera_dir(px as f64 + 0.5, py as f64 + 0.5);
        Ray::new(self.center(), self.pose.rotation * d)
    }

    pub fn to_camera(&self, world: &Vec3) -> Vec3 {
        self.pose.rotation.transpose() * (world - self.pose.translation)
    }

    /// Pixel coordinates of a world point, `None` behind the camera.
    pub fn project(&self, world: &Vec3) -> Option<(f64, f64)> {
        let c = self.to_camera(world);
        if c.z <= 0.0 {
            return None;
        }
        Some((self.fx * c.x / c.z + self.cx, self.fy * c.y / c.z + self.cy))
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    /// Same pose and field of view at a different resolution.
    pub fn with_resolution(&self, width: u32, height: u32) -> Self {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self {
            fx: self.fx * sx,
            fy: self.fy * sy,
            cx: self.cx * sx,
            cy: self.cy * sy,
            width,
            height,
            pose: self.pose,
        }
    }
}

/// Cameras on a sphere of `distance` around `center`, all looking at it.
pub fn ring_of_cameras(
    center: Vec3,
    distance: f64,
    count: usize,
    fov_x_deg: f64,
    resolution: u32,
) -> Vec<PinholeCamera> {
    crate::math::fibonacci_sphere(count)
        .into_iter()
        .map(|dir| {
            let eye = center + dir * distance;
            let up = if dir.z.abs() > 0.9 { Vec3::x() } else { Vec3::z() };
            PinholeCamera::look_at(eye, center, up, fov_x_deg, resolution, resolution)
                .expect("fibonacci directions are never degenerate")
        })
        .collect()
}
