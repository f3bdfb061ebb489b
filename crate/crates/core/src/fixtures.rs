//! Deterministic synthetic scenes whose oriented Gaussians wrap a known
//! surface: a sphere, a plane patch, a two-sided slab and a cube.

use nalgebra::{Quaternion, UnitQuaternion};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{ring_of_cameras, PinholeCamera};
use crate::gaussian::{OrientedGaussian, ALPHA_MAX};
use crate::math::{fibonacci_sphere, Vec3};
use crate::rng::stream_rng;
use crate::scene::GaussianScene;

#[derive(Debug, Error, PartialEq)]
pub enum FixtureError {
    #[error("bad fixture parameters: {0}")]
    BadParams(String),
}

/// Normal-sign magnitude used by fixtures; `tanh(3) ≈ 0.995`.
pub const FIXTURE_SIGN: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    SphereShell,
    PlanePatch,
    TwoPlane,
    CubeShell,
}

impl std::str::FromStr for FixtureKind {
    type Err = FixtureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sphere_shell" => Ok(Self::SphereShell),
            "plane_patch" => Ok(Self::PlanePatch),
            "two_plane" => Ok(Self::TwoPlane),
            "cube_shell" => Ok(Self::CubeShell),
            other => Err(FixtureError::BadParams(format!("unknown fixture kind {other:?}"))),
        }
    }
}

/// Parameters shared by every fixture kind. `size` is the sphere radius,
/// the plane half-extent, or the cube half-side; `count` is the number of
/// Gaussians (sphere) or per-side grid resolution (planes, cube faces).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixtureParams {
    pub size: f64,
    pub count: usize,
    pub cameras: usize,
    /// Extra cameras behind planar fixtures.
    pub back_cameras: usize,
    pub resolution: u32,
    pub camera_distance: f64,
    pub fov_deg: f64,
    pub opacity: f64,
    /// Tangential scale in units of the lattice spacing. At 1.0 a curved
    /// shell is opaque from inside, but the offset pivots of neighboring
    /// surfels sit inside each other's support and marching tetrahedra finds
    /// no crossing; use 0.5 when the scene is meant for meshing.
    pub tangent_scale: f64,
    /// Normal scale in units of the lattice spacing.
    pub normal_scale: f64,
    /// Separation of the two sheets of `two_plane`, in units of `size`.
    pub gap: f64,
}

impl Default for FixtureParams {
    fn default() -> Self {
        Self {
            size: 1.0,
            count: 400,
            cameras: 20,
            back_cameras: 0,
            resolution: 64,
            camera_distance: 3.0,
            fov_deg: 50.0,
            opacity: 0.95,
            tangent_scale: 1.0,
            normal_scale: 0.1,
            gap: 0.5,
        }
    }
}

impl FixtureParams {
    pub fn validate(&self) -> Result<(), FixtureError> {
        let bad = |m: &str| Err(FixtureError::BadParams(m.to_string()));
        if !(self.size > 0.0 && self.size.is_finite()) {
            return bad("size must be positive");
        }
        if self.count == 0 || self.resolution == 0 {
            return bad("count and resolution must be at least 1");
        }
        if !(self.opacity > 0.0 && self.opacity <= ALPHA_MAX) {
            return bad("opacity must lie in (0, alpha_max]");
        }
        if !(self.tangent_scale > 0.0 && self.normal_scale > 0.0) {
            return bad("scales must be positive");
        }
        if !(self.camera_distance > 1.0) {
            return bad("camera_distance must exceed 1 (units of size)");
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return bad("fov_deg must lie in (0, 180)");
        }
        if !(self.gap > 0.0) {
            return bad("gap must be positive");
        }
        Ok(())
    }
}

pub fn make_fixture(kind: FixtureKind, params: &FixtureParams) -> Result<GaussianScene, FixtureError> {
    params.validate()?;
    Ok(match kind {
        FixtureKind::SphereShell => sphere_shell(params),
        FixtureKind::PlanePatch => plane_patch(params),
        FixtureKind::TwoPlane => two_plane(params),
        FixtureKind::CubeShell => cube_shell(params),
    })
}

/// Rotation taking local `+z` to `normal`.
fn frame_for(normal: &Vec3) -> Quaternion<f64> {
    UnitQuaternion::rotation_between(&Vec3::z(), normal)
        .unwrap_or_else(|| UnitQuaternion::from_axis_angle(&Vec3::x_axis(), std::f64::consts::PI))
        .into_inner()
}

fn surfel(p: &FixtureParams, mean: Vec3, normal: Vec3, spacing: f64) -> OrientedGaussian {
    let t = spacing * p.tangent_scale;
    let s = spacing * p.normal_scale;
    OrientedGaussian::new(
        mean,
        Vec3::new(t, t, s),
        frame_for(&normal),
        p.opacity,
        FIXTURE_SIGN,
        normal,
        (normal * 0.5).add_scalar(0.5),
        ALPHA_MAX,
    )
    .expect("fixture parameters were validated")
}

/// Gaussians on a Fibonacci lattice of the sphere of radius `size` about
/// the origin, flattened tangentially, normals radial.
pub fn sphere_shell(p: &FixtureParams) -> GaussianScene {
    let r = p.size;
    let spacing = r * (4.0 * std::f64::consts::PI / p.count as f64).sqrt();
    let gaussians = fibonacci_sphere(p.count)
        .into_iter()
        .map(|d| surfel(p, d * r, d, spacing))
        .collect();
    let cameras = ring_of_cameras(Vec3::zeros(), p.camera_distance * r, p.cameras, p.fov_deg, p.resolution);
    GaussianScene::new(gaussians, cameras)
}

fn grid_patch(p: &FixtureParams, z: f64, normal: Vec3) -> Vec<OrientedGaussian> {
    let n = p.count;
    let spacing = 2.0 * p.size / n as f64;
    let mut out = Vec::with_capacity(n * n);
    for j in 0..n {
        for i in 0..n {
            let x = -p.size + spacing * (i as f64 + 0.5);
            let y = -p.size + spacing * (j as f64 + 0.5);
            out.push(surfel(p, Vec3::new(x, y, z), normal, spacing));
        }
    }
    out
}

/// Cameras on a cap above (`side = 1`) or below (`side = -1`) the `z = 0`
/// plane, looking at the origin.
fn cap_cameras(p: &FixtureParams, count: usize, side: f64) -> Vec<PinholeCamera> {
    let d = p.camera_distance * p.size;
    (0..count)
        .map(|k| {
            let eye = if k == 0 {
                Vec3::new(0.0, 0.0, side * d)
            } else {
                let phi = 2.0 * std::f64::consts::PI * (k - 1) as f64 / (count - 1) as f64;
                let tilt = 25f64.to_radians();
                Vec3::new(tilt.sin() * phi.cos(), tilt.sin() * phi.sin(), side * tilt.cos()) * d
            };
            PinholeCamera::look_at(eye, Vec3::zeros(), Vec3::y(), p.fov_deg, p.resolution, p.resolution)
                .expect("cap cameras are never degenerate")
        })
        .collect()
}

/// `count × count` grid on `z = 0` over `[-size, size]²`, normals `+z`,
/// `cameras` above and `back_cameras` below.
pub fn plane_patch(p: &FixtureParams) -> GaussianScene {
    let gaussians = grid_patch(p, 0.0, Vec3::z());
    let mut cameras = cap_cameras(p, p.cameras, 1.0);
    cameras.extend(cap_cameras(p, p.back_cameras, -1.0));
    GaussianScene::new(gaussians, cameras)
}

/// Two parallel patches at `z = ±gap·size/2` with normals facing away from
/// each other, seen from both sides.
pub fn two_plane(p: &FixtureParams) -> GaussianScene {
    let h = 0.5 * p.gap * p.size;
    let mut gaussians = grid_patch(p, h, Vec3::z());
    gaussians.extend(grid_patch(p, -h, -Vec3::z()));
    let mut cameras = cap_cameras(p, p.cameras, 1.0);
    cameras.extend(cap_cameras(p, p.back_cameras.max(p.cameras), -1.0));
    GaussianScene::new(gaussians, cameras)
}

/// `count × count` Gaussians on each face of the cube `[-size, size]³`,
/// normals along the face normals.
pub fn cube_shell(p: &FixtureParams) -> GaussianScene {
    let n = p.count;
    let h = p.size;
    let spacing = 2.0 * h / n as f64;
    let mut gaussians = Vec::with_capacity(6 * n * n);
    for axis in 0..3 {
        for side in [1.0, -1.0] {
            let mut normal = Vec3::zeros();
            normal[axis] = side;
            let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
            for j in 0..n {
                for i in 0..n {
                    let mut m = Vec3::zeros();
                    m[axis] = side * h;
                    m[u] = -h + spacing * (i as f64 + 0.5);
                    m[v] = -h + spacing * (j as f64 + 0.5);
                    gaussians.push(surfel(p, m, normal, spacing));
                }
            }
        }
    }
    let cameras = ring_of_cameras(Vec3::zeros(), p.camera_distance * h * 3f64.sqrt(), p.cameras, p.fov_deg, p.resolution);
    GaussianScene::new(gaussians, cameras)
}

/// Replaces every orientation with a random sign in `[-sign_range,
/// sign_range]` and a uniformly random direction.
pub fn randomize_orientations(scene: &mut GaussianScene, sign_range: f64, seed: u64) {
    let mut rng = stream_rng(seed, 0x0f1e);
    for i in 0..scene.len() {
        let sign = rng.random_range(-sign_range..=sign_range);
        let dir = loop {
            let d = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let n = d.norm();
            if n > 1e-3 && n <= 1.0 {
                break d / n;
            }
        };
        scene.set_normal_params(i, sign, dir);
    }
}
