//! Pivot-based marching tetrahedra.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::fields::{FieldConfig, Fields};
use crate::math::Vec3;
use crate::mesh::TriangleMesh;
use crate::scene::GaussianScene;

use super::delaunay::{delaunay_tetrahedralize, TetMesh};
use super::MeshingError;

/// Offset of the outer pivot, in units of the scale along the normal.
pub const PIVOT_OFFSET: f64 = 3.0;
const MIN_NORMAL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotScheme {
    /// Center and one point along the oriented normal.
    #[default]
    Two,
    /// Center and the eight corners of the `±3 s` box in the local frame.
    Nine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PivotKind {
    Center,
    Offset,
    Corner,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PivotSource {
    pub gaussian: usize,
    pub kind: PivotKind,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PivotSet {
    pub points: Vec<Vec3>,
    pub source: Vec<PivotSource>,
    /// Gaussians skipped for lacking a usable normal.
    pub skipped: usize,
}

impl PivotSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn push(&mut self, p: Vec3, gaussian: usize, kind: PivotKind) {
        self.points.push(p);
        self.source.push(PivotSource { gaussian, kind });
    }
}

pub fn generate_pivots(scene: &GaussianScene) -> PivotSet {
    generate_pivots_with(scene, PivotScheme::Two)
}

pub fn generate_pivots_with(scene: &GaussianScene, scheme: PivotScheme) -> PivotSet {
    let mut set = PivotSet::default();
    for (i, g) in scene.gaussians().iter().enumerate() {
        match scheme {
            PivotScheme::Two => {
                let (Ok(unit), Ok(s)) = (g.unit_normal(), g.normal_scale_along()) else {
                    set.skipped += 1;
                    continue;
                };
                if g.oriented_normal().norm() < MIN_NORMAL {
                    set.skipped += 1;
                    continue;
                }
                set.push(g.mean, i, PivotKind::Center);
                set.push(g.mean + unit * (PIVOT_OFFSET * s), i, PivotKind::Offset);
            }
            PivotScheme::Nine => {
                set.push(g.mean, i, PivotKind::Center);
                let r = g.rotation().to_rotation_matrix().into_inner();
                let s = g.scales() * PIVOT_OFFSET;
                for corner in 0..8 {
                    let sign = |bit: usize| if corner & (1 << bit) != 0 { 1.0 } else { -1.0 };
                    let local = Vec3::new(sign(0) * s.x, sign(1) * s.y, sign(2) * s.z);
                    set.push(g.mean + r * local, i, PivotKind::Corner);
                }
            }
        }
    }
    if set.skipped > 0 {
        log::info!("pivots: skipped {} Gaussians with zero normal", set.skipped);
    }
    set
}

/// Marching-tetrahedra output. `brackets[v]` holds the endpoints of the
/// tet edge vertex `v` was cut from, high-value endpoint first.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct IsoSurface {
    pub mesh: TriangleMesh,
    pub brackets: Vec<(Vec3, Vec3)>,
    pub bracket_values: Vec<(f64, f64)>,
}

/// Extracts the `iso` level set of per-vertex `values`, faces oriented
/// toward the low-value side.
pub fn marching_tetrahedra(tets: &TetMesh, values: &[f64], iso: f64) -> IsoSurface {
    assert_eq!(values.len(), tets.vertices.len(), "one value per tet vertex");
    let mut out = IsoSurface::default();
    let mut edge_vertex: HashMap<(usize, usize), usize> = HashMap::new();
    let mut vertex_on = |a: usize, b: usize, out: &mut IsoSurface| -> usize {
        let key = (a.min(b), a.max(b));
        *edge_vertex.entry(key).or_insert_with(|| {
            let (hi, lo) = if values[a] > iso { (a, b) } else { (b, a) };
            let (ph, pl) = (tets.vertices[hi], tets.vertices[lo]);
            let (vh, vl) = (values[hi], values[lo]);
            let s = ((vh - iso) / (vh - vl)).clamp(0.0, 1.0);
            out.mesh.vertices.push(ph + (pl - ph) * s);
            out.brackets.push((ph, pl));
            out.bracket_values.push((vh, vl));
            out.mesh.vertices.len() - 1
        })
    };

    for tet in &tets.tets {
        let high: Vec<usize> = (0..4).filter(|&k| values[tet[k]] > iso).collect();
        let low: Vec<usize> = (0..4).filter(|&k| values[tet[k]] <= iso).collect();
        // Orientation follows from the parity of (high..., low...) as a
        // permutation of the positively oriented tet.
        let order: Vec<usize> = high.iter().chain(&low).copied().collect();
        let even = permutation_is_even(&order);
        let v = |k: usize| tet[k];
        let mut polygon: Vec<usize> = match (high.len(), low.len()) {
            (1, 3) => low.iter().map(|&l| vertex_on(v(high[0]), v(l), &mut out)).collect(),
            (3, 1) => high.iter().map(|&h| vertex_on(v(h), v(low[0]), &mut out)).collect(),
            (2, 2) => vec![
                vertex_on(v(high[0]), v(low[0]), &mut out),
                vertex_on(v(high[0]), v(low[1]), &mut out),
                vertex_on(v(high[1]), v(low[1]), &mut out),
                vertex_on(v(high[1]), v(low[0]), &mut out),
            ],
            _ => continue,
        };
        // With an even order every polygon above already faces the low side.
        if !even {
            polygon.reverse();
        }
        out.mesh.faces.push([polygon[0], polygon[1], polygon[2]]);
        if polygon.len() == 4 {
            out.mesh.faces.push([polygon[0], polygon[2], polygon[3]]);
        }
    }
    out
}

fn permutation_is_even(p: &[usize]) -> bool {
    let mut inversions = 0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                inversions += 1;
            }
        }
    }
    inversions % 2 == 0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MtetConfig {
    pub pivots: PivotScheme,
    pub iso: f64,
    pub refine_iterations: usize,
    pub refine_tolerance: f64,
    pub field: FieldConfig,
}

impl Default for MtetConfig {
    fn default() -> Self {
        Self {
            pivots: PivotScheme::Two,
            iso: 0.5,
            refine_iterations: 30,
            refine_tolerance: 1e-3,
            field: FieldConfig::default(),
        }
    }
}

/// Moves every vertex along its bracketing edge by bisection on occupancy
/// until `|occ - iso| < tolerance` or `iterations` evaluations.
pub fn refine_to_isosurface(
    surface: &IsoSurface,
    fields: &Fields,
    iso: f64,
    iterations: usize,
    tolerance: f64,
) -> Result<TriangleMesh, MeshingError> {
    let mut mesh = surface.mesh.clone();
    let mut hint = None;
    for (v, &(hi, lo)) in surface.brackets.iter().enumerate() {
        let x0 = mesh.vertices[v];
        let len2 = (lo - hi).norm_squared();
        let mut s = if len2 > 0.0 { (x0 - hi).dot(&(lo - hi)) / len2 } else { 0.0 };
        let (mut a, mut b) = (0.0, 1.0);
        let mut x = x0;
        for _ in 0..iterations {
            let (cam, vac) = fields.vacancy_hinted(&x, hint)?;
            hint = Some(cam);
            let occ = 1.0 - vac;
            if (occ - iso).abs() < tolerance {
                break;
            }
            if occ > iso {
                a = s;
            } else {
                b = s;
            }
            s = 0.5 * (a + b);
            x = hi + (lo - hi) * s;
        }
        mesh.vertices[v] = x;
    }
    Ok(mesh)
}

/// Pivots, their occupancies, the tetrahedralization and the raw
/// (unrefined) surface.
#[derive(Clone, Debug)]
pub struct MtetStages {
    pub pivots: PivotSet,
    pub occupancy: Vec<f64>,
    pub tets: TetMesh,
    pub surface: IsoSurface,
}

pub fn mtet_stages(scene: &GaussianScene, config: &MtetConfig) -> Result<MtetStages, MeshingError> {
    let pivots = generate_pivots_with(scene, config.pivots);
    if pivots.len() < 4 {
        return Err(MeshingError::DegenerateInput(format!("only {} pivots", pivots.len())));
    }
    let fields = Fields::new(scene, config.field.clone());
    let occupancy = occupancies(&fields, &pivots.points)?;
    let tets = delaunay_tetrahedralize(&pivots.points)?;
    let mut values = vec![0.0; tets.vertices.len()];
    for (i, v) in tets.input_vertex.iter().enumerate() {
        if let Some(v) = v {
            values[*v] = occupancy[i];
        }
    }
    let surface = marching_tetrahedra(&tets, &values, config.iso);
    Ok(MtetStages {
        pivots,
        occupancy,
        tets,
        surface,
    })
}

pub(crate) fn occupancies(fields: &Fields, points: &[Vec3]) -> Result<Vec<f64>, MeshingError> {
    let mut hint = None;
    let mut out = Vec::with_capacity(points.len());
    for p in points {
        let (cam, v) = fields.vacancy_hinted(p, hint)?;
        hint = Some(cam);
        out.push(1.0 - v);
    }
    Ok(out)
}

/// Pivots, occupancy, Delaunay, marching tetrahedra and isosurface
/// refinement.
pub fn mesh_mtet(scene: &GaussianScene, config: &MtetConfig) -> Result<TriangleMesh, MeshingError> {
    let stages = mtet_stages(scene, config)?;
    let fields = Fields::new(scene, config.field.clone());
    refine_to_isosurface(
        &stages.surface,
        &fields,
        config.iso,
        config.refine_iterations,
        config.refine_tolerance,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::OrientedGaussian;
    use crate::mesh::watertight_check;
    use approx::assert_relative_eq;

    #[test]
    fn pivot_offset_for_isotropic_gaussian() {
        let g = OrientedGaussian::isotropic(Vec3::zeros(), 0.1, 0.5, Vec3::z()).unwrap();
        let scene = GaussianScene::new(vec![g], vec![]);
        let p = generate_pivots(&scene);
        assert_eq!(p.len(), 2);
        assert_eq!(p.points[0], Vec3::zeros());
        assert_relative_eq!(p.points[1], Vec3::new(0.0, 0.0, 0.3), epsilon = 1e-12);
    }

    #[test]
    fn zero_normal_is_skipped() {
        let mut g = OrientedGaussian::isotropic(Vec3::zeros(), 0.1, 0.5, Vec3::z()).unwrap();
        g.normal_sign = 0.0;
        let h = OrientedGaussian::isotropic(Vec3::x(), 0.1, 0.5, Vec3::z()).unwrap();
        let scene = GaussianScene::new(vec![g, h], vec![]);
        let p = generate_pivots(&scene);
        assert_eq!((p.len(), p.skipped), (2, 1));
        assert_eq!(generate_pivots_with(&scene, PivotScheme::Nine).len(), 18);
    }

    #[test]
    fn one_vertex_above_gives_one_triangle() {
        let tets = delaunay_tetrahedralize(&[Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()]).unwrap();
        let s = marching_tetrahedra(&tets, &[1.0, 0.0, 0.0, 0.0], 0.5);
        assert_eq!(s.mesh.faces.len(), 1);
        // Normal points away from the high vertex at the origin.
        assert!(s.mesh.face_normal(0).dot(&Vec3::repeat(1.0)) > 0.0);
        let none = marching_tetrahedra(&tets, &[0.0; 4], 0.5);
        assert!(none.mesh.is_empty());
    }

    #[test]
    fn analytic_sphere_is_closed() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        // Random pivot-like pairs straddling the sphere, plus the center.
        let mut pts = vec![Vec3::zeros()];
        for _ in 0..3000 {
            let d = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            if d.norm() < 1e-3 || d.norm() > 1.0 {
                continue;
            }
            let d = d.normalize();
            pts.push(d * 0.96);
            pts.push(d * 1.04);
        }
        let tets = delaunay_tetrahedralize(&pts).unwrap();
        let r = 1.0;
        let occ: Vec<f64> = tets
            .vertices
            .iter()
            .map(|p| 0.5 - 0.5 * ((p.norm() - r) / (0.05 * r)).tanh())
            .collect();
        let s = marching_tetrahedra(&tets, &occ, 0.5);
        let w = watertight_check(&s.mesh);
        assert!(w.is_closed_manifold, "{w:?}");
        assert!(s.mesh.signed_volume() > 0.0);
        let hausdorff = s.mesh.vertices.iter().map(|p| (p.norm() - r).abs()).fold(0.0, f64::max);
        assert!(hausdorff < 0.03 * r, "{hausdorff}");
    }
}
