//! Primal adaptive meshing: sample the marching-tetrahedra surface, project
//! the samples onto the 0.5 vacancy level set, filter outliers, then
//! tetrahedralize and carve the inside tets.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::camera::PinholeCamera;
use crate::fields::{vector_field, Fields};
use crate::math::{sample_triangle, Aabb, Vec3};
use crate::mesh::{watertight_check, TriangleMesh};
use crate::rng::stream_rng;
use crate::scene::GaussianScene;

use super::delaunay::{delaunay_tetrahedralize, TetMesh};
use super::mtet::{mesh_mtet, MtetConfig};
use super::MeshingError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PamConfig {
    pub samples: usize,
    pub newton_steps: usize,
    pub eps: f64,
    pub max_rounds: usize,
    pub samples_per_tet: usize,
    /// Upper bound on a single Newton displacement, as a multiple of the
    /// largest Gaussian scale.
    pub max_step_scales: f64,
    pub roi: Option<Aabb>,
    pub seed: u64,
    pub mtet: MtetConfig,
}

impl Default for PamConfig {
    fn default() -> Self {
        Self {
            samples: 20_000,
            newton_steps: 10,
            eps: 0.1,
            max_rounds: 5,
            samples_per_tet: 8,
            max_step_scales: 1.0,
            roi: None,
            seed: 0,
            mtet: MtetConfig::default(),
        }
    }
}

/// Draws `count` surface points, picking faces with probability
/// proportional to area over distance to the nearest camera center.
pub fn pam_sample_faces(
    mesh: &TriangleMesh,
    cameras: &[PinholeCamera],
    count: usize,
    roi: Option<&Aabb>,
    rng: &mut impl Rng,
) -> Vec<Vec3> {
    let centers: Vec<Vec3> = cameras.iter().map(|c| c.center()).collect();
    let weights: Vec<f64> = (0..mesh.faces.len())
        .map(|f| {
            let [a, b, c] = mesh.corners(f);
            if let Some(r) = roi {
                if !Aabb::from_points([&a, &b, &c]).intersects(r) {
                    return 0.0;
                }
            }
            let centroid = (a + b + c) / 3.0;
            let d = centers
                .iter()
                .map(|o| (o - centroid).norm())
                .fold(f64::INFINITY, f64::min);
            let area = mesh.face_area(f);
            if d.is_finite() {
                area / d.max(1e-12)
            } else {
                area
            }
        })
        .collect();
    let Ok(pick) = WeightedIndex::new(&weights) else {
        return Vec::new();
    };
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while out.len() < count && attempts < 100 * count.max(1) {
        attempts += 1;
        let [a, b, c] = mesh.corners(pick.sample(rng));
        let p = sample_triangle(&a, &b, &c, rng.random(), rng.random());
        if roi.is_none_or(|r| r.contains(&p)) {
            out.push(p);
        }
    }
    out
}

/// Newton step toward `v = 0.5` along the vector field.
///
/// With `V = ∇log v`, `∇v = v V` and the step
/// `x += (0.5 - v) / 2 · ∇v / ‖∇v‖²` becomes `(0.5 - v) / (2 v) · V / ‖V‖²`.
/// Displacements are clamped to `max_step`; points where the field
/// vanishes stay put.
pub fn newton_step(fields: &Fields, x: &Vec3, max_step: f64, hint: &mut Option<usize>) -> Result<(Vec3, f64), MeshingError> {
    let (cam, v) = fields.vacancy_hinted(x, *hint)?;
    *hint = Some(cam);
    let vf = vector_field(fields.scene, x, fields.config.k_neighbors);
    let n2 = vf.norm_squared();
    if n2.sqrt() <= fields.config.vector_zero_eps || v <= 0.0 {
        return Ok((*x, v));
    }
    let mut step = vf * ((0.5 - v) / (2.0 * v * n2));
    let len = step.norm();
    if len > max_step {
        step *= max_step / len;
    }
    Ok((x + step, v))
}

pub fn pam_newton_project(
    points: &[Vec3],
    fields: &Fields,
    steps: usize,
    max_step: f64,
) -> Result<Vec<Vec3>, MeshingError> {
    let mut hint = None;
    points
        .iter()
        .map(|p| {
            let mut x = *p;
            for _ in 0..steps {
                let (next, v) = newton_step(fields, &x, max_step, &mut hint)?;
                if next == x || v == 0.5 {
                    break;
                }
                x = next;
            }
            Ok(x)
        })
        .collect()
}

/// Keeps points with `|0.5 - v| ≤ eps`, in input order.
pub fn pam_filter(points: &[Vec3], fields: &Fields, eps: f64) -> Result<(Vec<Vec3>, usize), MeshingError> {
    let mut hint = None;
    let mut kept = Vec::with_capacity(points.len());
    for p in points {
        let (cam, v) = fields.vacancy_hinted(p, hint)?;
        hint = Some(cam);
        if (0.5 - v).abs() <= eps {
            kept.push(*p);
        }
    }
    let removed = points.len() - kept.len();
    Ok((kept, removed))
}

/// Inside (`true`) when the median vacancy over `samples_per_tet` uniform
/// interior samples is below 0.5.
pub fn pam_classify_tets(
    tets: &TetMesh,
    fields: &Fields,
    samples_per_tet: usize,
    seed: u64,
) -> Result<Vec<bool>, MeshingError> {
    assert!(samples_per_tet >= 1, "need at least one sample per tet");
    let mut rng = stream_rng(seed, 0x7e75);
    let mut hint = None;
    let mut labels = Vec::with_capacity(tets.len());
    let mut values = Vec::with_capacity(samples_per_tet);
    let half = samples_per_tet / 2;
    for t in 0..tets.len() {
        let c = tets.corners(t);
        values.clear();
        let (mut below, mut above) = (0, 0);
        // Draw every sample so the stream does not depend on field values,
        // but stop evaluating once the majority is decided.
        let points: Vec<Vec3> = (0..samples_per_tet)
            .map(|_| {
                let w = uniform_barycentric(&mut rng);
                c[0] * w[0] + c[1] * w[1] + c[2] * w[2] + c[3] * w[3]
            })
            .collect();
        for x in &points {
            let (clear, cam) = fields.vacancy_exceeds(x, 0.5, hint)?;
            hint = cam.or(hint);
            if clear {
                above += 1;
            } else {
                below += 1;
            }
            if below > half || above > half {
                break;
            }
        }
        let inside = if below > half {
            true
        } else if above > half {
            false
        } else {
            // Even split: fall back to the median of the actual values.
            values.clear();
            for x in &points {
                values.push(fields.vacancy(x)?);
            }
            median(&mut values) < 0.5
        };
        labels.push(inside);
    }
    Ok(labels)
}

fn uniform_barycentric(rng: &mut impl Rng) -> [f64; 4] {
    let mut e = [0.0; 4];
    for x in &mut e {
        *x = -(1.0 - rng.random::<f64>()).ln();
    }
    let s: f64 = e.iter().sum();
    e.map(|x| x / s)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Faces separating inside from outside tets, oriented away from the
/// inside tet. Hull faces count as bordering outside.
pub fn pam_extract(tets: &TetMesh, inside: &[bool]) -> TriangleMesh {
    assert_eq!(inside.len(), tets.len(), "one label per tet");
    let mut faces = Vec::new();
    for t in 0..tets.len() {
        if !inside[t] {
            continue;
        }
        for k in 0..4 {
            let outside = match tets.neighbors[t][k] {
                None => true,
                Some(n) => !inside[n],
            };
            if outside {
                faces.push(tets.face(t, k));
            }
        }
    }
    TriangleMesh {
        vertices: tets.vertices.clone(),
        faces,
    }
    .compacted()
}

/// Flips labels around edges where the carved surface is not a manifold:
/// edges whose ring of tets alternates inside/outside more than once.
/// Returns the number of flipped tets.
pub fn repair_labels(tets: &TetMesh, inside: &mut [bool], max_passes: usize) -> usize {
    let mut flipped = 0;
    for _ in 0..max_passes {
        let mesh = pam_extract_raw(tets, inside);
        let bad = non_manifold_edges(&mesh);
        if bad.is_empty() {
            break;
        }
        // Ring of tets around each bad edge; turn the minority label of
        // the ring into the majority.
        let mut around: std::collections::HashMap<(usize, usize), Vec<usize>> =
            bad.iter().map(|&e| (e, Vec::new())).collect();
        for (t, tet) in tets.tets.iter().enumerate() {
            for i in 0..4 {
                for j in i + 1..4 {
                    let e = (tet[i].min(tet[j]), tet[i].max(tet[j]));
                    if let Some(list) = around.get_mut(&e) {
                        list.push(t);
                    }
                }
            }
        }
        let mut changed = false;
        let mut keys: Vec<_> = around.keys().copied().collect();
        keys.sort_unstable();
        for e in keys {
            let ring = &around[&e];
            let ins = ring.iter().filter(|&&t| inside[t]).count();
            let to_inside = 2 * ins >= ring.len();
            for &t in ring {
                if inside[t] != to_inside {
                    inside[t] = to_inside;
                    flipped += 1;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    flipped
}

fn pam_extract_raw(tets: &TetMesh, inside: &[bool]) -> Vec<[usize; 3]> {
    let mut faces = Vec::new();
    for t in 0..tets.len() {
        if !inside[t] {
            continue;
        }
        for k in 0..4 {
            if tets.neighbors[t][k].is_none_or(|n| !inside[n]) {
                faces.push(tets.face(t, k));
            }
        }
    }
    faces
}

fn non_manifold_edges(faces: &[[usize; 3]]) -> Vec<(usize, usize)> {
    let mut count: std::collections::HashMap<(usize, usize), usize> = std::collections::HashMap::new();
    for f in faces {
        for i in 0..3 {
            let (a, b) = (f[i], f[(i + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut bad: Vec<_> = count.into_iter().filter(|&(_, c)| c > 2).map(|(e, _)| e).collect();
    bad.sort_unstable();
    bad
}

#[derive(Clone, Debug)]
pub struct PamOutput {
    pub mesh: TriangleMesh,
    pub points: Vec<Vec3>,
    pub rounds: usize,
    pub removed_per_round: Vec<usize>,
    pub repaired_tets: usize,
}

/// Full pipeline: marching-tetrahedra substrate, then rounds of
/// sample/project/filter until nothing is removed, then Delaunay,
/// classification and extraction.
pub fn mesh_pam(scene: &GaussianScene, config: &PamConfig) -> Result<TriangleMesh, MeshingError> {
    mesh_pam_detailed(scene, config).map(|o| o.mesh)
}

pub fn mesh_pam_detailed(scene: &GaussianScene, config: &PamConfig) -> Result<PamOutput, MeshingError> {
    if !(config.eps > 0.0) || config.newton_steps == 0 || config.samples_per_tet == 0 {
        return Err(MeshingError::BadConfig(
            "eps, newton_steps and samples_per_tet must be positive".into(),
        ));
    }
    let clock = std::time::Instant::now();
    let substrate = mesh_mtet(scene, &config.mtet)?;
    log::debug!("pam: substrate {} faces in {:.2?}", substrate.faces.len(), clock.elapsed());
    if substrate.is_empty() {
        return Err(MeshingError::InsufficientPoints { found: 0 });
    }
    let fields = Fields::new(scene, config.mtet.field.clone());
    let max_step = config.max_step_scales * scene.max_scale();
    let roi = config.roi.as_ref();
    let mut rng = stream_rng(config.seed, 0x5a3);

    let mut kept: Vec<Vec3> = Vec::new();
    let mut want = config.samples;
    let mut removed_per_round = Vec::new();
    let mut rounds = 0;
    while want > 0 && rounds < config.max_rounds.max(1) {
        rounds += 1;
        let drawn = pam_sample_faces(&substrate, &scene.cameras, want, roi, &mut rng);
        let projected = pam_newton_project(&drawn, &fields, config.newton_steps, max_step)?;
        let in_roi: Vec<Vec3> = projected
            .into_iter()
            .filter(|p| roi.is_none_or(|r| r.contains(p)))
            .collect();
        let (good, _) = pam_filter(&in_roi, &fields, config.eps)?;
        let removed = want - good.len();
        removed_per_round.push(removed);
        log::debug!("pam round {rounds}: kept {} removed {removed}", good.len());
        kept.extend(good);
        want = removed;
    }
    if kept.len() < 4 {
        return Err(MeshingError::InsufficientPoints { found: kept.len() });
    }

    log::debug!("pam: {} points after {rounds} rounds, {:.2?}", kept.len(), clock.elapsed());
    let tets = delaunay_tetrahedralize(&kept)?;
    log::debug!("pam: {} tets, {:.2?}", tets.len(), clock.elapsed());
    let mut inside = pam_classify_tets(&tets, &fields, config.samples_per_tet, config.seed)?;
    log::debug!("pam: classified, {:.2?}", clock.elapsed());
    let repaired = repair_labels(&tets, &mut inside, 8);
    let mesh = pam_extract(&tets, &inside);
    let w = watertight_check(&mesh);
    if !w.is_closed_manifold {
        log::warn!(
            "pam: output not watertight ({} boundary, {} non-manifold edges)",
            w.boundary_edges,
            w.non_manifold_edges
        );
    }
    Ok(PamOutput {
        mesh,
        points: kept,
        rounds,
        removed_per_round,
        repaired_tets: repaired,
    })
}
