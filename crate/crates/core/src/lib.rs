//! Oriented Gaussian fields, normal wrapping, and isosurface meshing.

// NaN-rejecting comparisons are written as `!(a > b)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod camera;
pub mod cli;
pub mod evalkit;
pub mod fields;
pub mod fixtures;
pub mod gaussian;
pub mod io;
pub mod math;
pub mod meshing;
pub mod mesh;
pub mod render;
pub mod rng;
pub mod scene;
pub mod wrap;
pub mod spatial;

pub use camera::{PinholeCamera, Pose, Ray};
pub use gaussian::OrientedGaussian;
pub use math::{Aabb, Vec3};
pub use mesh::TriangleMesh;
pub use scene::GaussianScene;
