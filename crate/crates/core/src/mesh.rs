//! Indexed triangle meshes and topology checks.

use std::collections::HashMap;

use thiserror::Error;

use crate::math::{triangle_area, Aabb, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("face {face} references vertex {vertex} but the mesh has {count} vertices")]
    BadIndex { face: usize, vertex: usize, count: usize },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

/// Result of [`watertight_check`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Watertightness {
    pub is_closed_manifold: bool,
    pub boundary_edges: usize,
    pub non_manifold_edges: usize,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let mesh = Self { vertices, faces };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        let count = self.vertices.len();
        for (face, f) in self.faces.iter().enumerate() {
            for &vertex in f {
                if vertex >= count {
                    return Err(MeshError::BadIndex { face, vertex, count });
                }
            }
        }
        Ok(())
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn corners(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let [a, b, c] = self.corners(f);
        triangle_area(&a, &b, &c)
    }

    pub fn face_centroid(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.corners(f);
        (a + b + c) / 3.0
    }

    /// Unnormalized face normal (twice the area).
    pub fn face_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.corners(f);
        (b - a).cross(&(c - a))
    }

    pub fn area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn bbox(&self) -> Aabb {
        Aabb::from_points(&self.vertices)
    }

    /// Signed enclosed volume; positive for closed meshes with outward faces.
    pub fn signed_volume(&self) -> f64 {
        self.faces
            .iter()
            .map(|&[a, b, c]| {
                self.vertices[a].dot(&self.vertices[b].cross(&self.vertices[c])) / 6.0
            })
            .sum()
    }

    /// Mean length over unique undirected edges.
    pub fn mean_edge_length(&self) -> f64 {
        let mut seen = std::collections::HashSet::new();
        let mut total = 0.0;
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                if seen.insert((a.min(b), a.max(b))) {
                    total += (self.vertices[a] - self.vertices[b]).norm();
                }
            }
        }
        if seen.is_empty() {
            0.0
        } else {
            total / seen.len() as f64
        }
    }

    /// Drops vertices no face refers to, keeping relative order.
    pub fn compacted(&self) -> Self {
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let faces = self
            .faces
            .iter()
            .map(|f| {
                f.map(|v| {
                    if remap[v] == usize::MAX {
                        remap[v] = vertices.len();
                        vertices.push(self.vertices[v]);
                    }
                    remap[v]
                })
            })
            .collect();
        Self { vertices, faces }
    }

    /// Welds bit-identical vertices and removes faces that collapse onto a
    /// repeated vertex.
    pub fn cleaned(&self) -> Self {
        let mut key_to_new: HashMap<[u64; 3], usize> = HashMap::new();
        let mut vertices = Vec::new();
        let remap: Vec<usize> = self
            .vertices
            .iter()
            .map(|v| {
                let key = [v.x.to_bits(), v.y.to_bits(), v.z.to_bits()];
                *key_to_new.entry(key).or_insert_with(|| {
                    vertices.push(*v);
                    vertices.len() - 1
                })
            })
            .collect();
        let faces = self
            .faces
            .iter()
            .map(|f| f.map(|v| remap[v]))
            .filter(|f| f[0] != f[1] && f[1] != f[2] && f[0] != f[2])
            .collect();
        Self { vertices, faces }.compacted()
    }

    /// 1-to-4 midpoint subdivision; edge midpoints are shared so closed
    /// meshes stay closed.
    pub fn subdivided(&self) -> Self {
        let mut vertices = self.vertices.clone();
        let mut mids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| -> usize {
            *mids.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push((verts[a] + verts[b]) * 0.5);
                verts.len() - 1
            })
        };
        let mut faces = Vec::with_capacity(self.faces.len() * 4);
        for &[a, b, c] in &self.faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            faces.push([a, ab, ca]);
            faces.push([ab, b, bc]);
            faces.push([ca, bc, c]);
            faces.push([ab, bc, ca]);
        }
        Self { vertices, faces }
    }

    /// Appends another mesh, offsetting its indices.
    pub fn merge(&mut self, other: &TriangleMesh) {
        let off = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.faces
            .extend(other.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
    }
}

/// Closed 2-manifold test on edges: every undirected edge must be used by
/// exactly two faces, once in each direction.
pub fn watertight_check(mesh: &TriangleMesh) -> Watertightness {
    // (forward uses, backward uses) keyed by the sorted vertex pair.
    let mut uses: HashMap<(usize, usize), (u32, u32)> = HashMap::new();
    for f in &mesh.faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            let e = uses.entry((a.min(b), a.max(b))).or_default();
            if a < b {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
    }
    let mut boundary = 0;
    let mut non_manifold = 0;
    for &(fwd, bwd) in uses.values() {
        match fwd + bwd {
            1 => boundary += 1,
            2 if fwd == 1 && bwd == 1 => {}
            _ => non_manifold += 1,
        }
    }
    Watertightness {
        is_closed_manifold: boundary == 0 && non_manifold == 0,
        boundary_edges: boundary,
        non_manifold_edges: non_manifold,
    }
}

/// Surface of the tetrahedron with the given corners, faces outward.
pub fn tetrahedron(corners: [Vec3; 4]) -> TriangleMesh {
    let [a, b, c, d] = corners;
    let positive = (b - a).cross(&(c - a)).dot(&(d - a)) > 0.0;
    let faces = if positive {
        vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]]
    } else {
        vec![[0, 1, 2], [0, 3, 1], [1, 3, 2], [0, 2, 3]]
    };
    TriangleMesh {
        vertices: corners.to_vec(),
        faces,
    }
}

/// Closed axis-aligned box, two triangles per side, faces outward.
pub fn box_mesh(lo: Vec3, hi: Vec3) -> TriangleMesh {
    let v = |i: usize| {
        Vec3::new(
            if i & 1 == 0 { lo.x } else { hi.x },
            if i & 2 == 0 { lo.y } else { hi.y },
            if i & 4 == 0 { lo.z } else { hi.z },
        )
    };
    let vertices = (0..8).map(v).collect();
    let faces = vec![
        [0, 2, 3], [0, 3, 1], // z = lo
        [4, 5, 7], [4, 7, 6], // z = hi
        [0, 1, 5], [0, 5, 4], // y = lo
        [2, 6, 7], [2, 7, 3], // y = hi
        [0, 4, 6], [0, 6, 2], // x = lo
        [1, 3, 7], [1, 7, 5], // x = hi
    ];
    TriangleMesh { vertices, faces }
}

/// Geodesic sphere from a subdivided octahedron, vertices projected onto
/// the sphere, faces outward.
pub fn icosphere(center: Vec3, radius: f64, levels: usize) -> TriangleMesh {
    let mut mesh = TriangleMesh {
        vertices: vec![
            Vec3::x(),
            -Vec3::x(),
            Vec3::y(),
            -Vec3::y(),
            Vec3::z(),
            -Vec3::z(),
        ],
        faces: vec![
            [0, 2, 4], [2, 1, 4], [1, 3, 4], [3, 0, 4],
            [2, 0, 5], [1, 2, 5], [3, 1, 5], [0, 3, 5],
        ],
    };
    for _ in 0..levels {
        mesh = mesh.subdivided();
        for v in &mut mesh.vertices {
            *v = v.normalize();
        }
    }
    for v in &mut mesh.vertices {
        *v = center + *v * radius;
    }
    mesh
}
