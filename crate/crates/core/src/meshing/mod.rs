//! Surface extraction from the vacancy field.

mod delaunay;
mod mtet;
mod pam;

use thiserror::Error;

use crate::fields::FieldError;

pub use delaunay::{circumsphere, delaunay_tetrahedralize, insphere, orient3d, TetMesh, TET_FACES};
pub use mtet::{
    generate_pivots, generate_pivots_with, marching_tetrahedra, mesh_mtet, mtet_stages, refine_to_isosurface,
    IsoSurface, MtetConfig, MtetStages, PivotKind, PivotScheme, PivotSet, PivotSource, PIVOT_OFFSET,
};
pub use pam::{
    mesh_pam, mesh_pam_detailed, newton_step, pam_classify_tets, pam_extract, pam_filter, pam_newton_project,
    pam_sample_faces, repair_labels, PamConfig, PamOutput,
};

#[derive(Debug, Error, PartialEq)]
pub enum MeshingError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("only {found} points survived filtering, need at least 4")]
    InsufficientPoints { found: usize },
    #[error("invalid meshing config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}
