//! Incremental Delaunay tetrahedralization (Bowyer-Watson).
//!
//! Predicates run in plain floating point on coordinates perturbed by a
//! deterministic per-point jitter of `1e-9` times the bounding-box diagonal,
//! which breaks the cospherical and coplanar ties that exact predicates
//! would otherwise have to resolve symbolically. Output vertices keep their
//! unperturbed coordinates.

use std::collections::HashMap;

use crate::math::{Aabb, Vec3};
use crate::rng::hash_unit;
use crate::spatial::KdTree;

use super::MeshingError;

/// Vertex triples of the four faces, outward-facing, face `k` opposite
/// local vertex `k`.
pub const TET_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]];

const NONE: u32 = u32::MAX;
const JITTER: f64 = 1e-9;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TetMesh {
    pub vertices: Vec<Vec3>,
    /// Positively oriented vertex quadruples.
    pub tets: Vec<[usize; 4]>,
    /// `neighbors[t][k]`: tet across the face opposite local vertex `k`.
    pub neighbors: Vec<[Option<usize>; 4]>,
    /// For each input point, the vertex it was merged into. `None` only for
    /// points the builder had to skip.
    pub input_vertex: Vec<Option<usize>>,
}

/// `(b - a) · ((c - a) × (d - a))`, positive when `d` lies on the side of
/// the right-handed normal of `(a, b, c)`.
#[inline]
pub fn orient3d(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> f64 {
    (b - a).dot(&(c - a).cross(&(d - a)))
}

/// Positive when `e` lies inside the circumsphere of the positively
/// oriented tet `(a, b, c, d)`.
#[inline]
pub fn insphere(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3, e: &Vec3) -> f64 {
    let (a, b, c, d) = (a - e, b - e, c - e, d - e);
    let det3 = |p: &Vec3, q: &Vec3, r: &Vec3| p.dot(&q.cross(r));
    let det = -a.norm_squared() * det3(&b, &c, &d) + b.norm_squared() * det3(&a, &c, &d)
        - c.norm_squared() * det3(&a, &b, &d)
        + d.norm_squared() * det3(&a, &b, &c);
    -det
}

/// Center and radius of the sphere through four points.
pub fn circumsphere(a: &Vec3, b: &Vec3, c: &Vec3, d: &Vec3) -> (Vec3, f64) {
    let (u, v, w) = (b - a, c - a, d - a);
    let denom = 2.0 * u.dot(&v.cross(&w));
    let num = v.cross(&w) * u.norm_squared() + w.cross(&u) * v.norm_squared() + u.cross(&v) * w.norm_squared();
    let off = num / denom;
    (a + off, off.norm())
}

impl TetMesh {
    pub fn len(&self) -> usize {
        self.tets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tets.is_empty()
    }

    pub fn corners(&self, t: usize) -> [Vec3; 4] {
        self.tets[t].map(|v| self.vertices[v])
    }

    /// Outward-oriented face of tet `t` opposite local vertex `k`.
    pub fn face(&self, t: usize, k: usize) -> [usize; 3] {
        TET_FACES[k].map(|j| self.tets[t][j])
    }

    pub fn signed_volume(&self, t: usize) -> f64 {
        let [a, b, c, d] = self.corners(t);
        orient3d(&a, &b, &c, &d) / 6.0
    }

    pub fn centroid(&self, t: usize) -> Vec3 {
        let [a, b, c, d] = self.corners(t);
        (a + b + c + d) / 4.0
    }

    /// Whether every neighbor link is mirrored and shares the face.
    pub fn adjacency_is_symmetric(&self) -> bool {
        for (t, nb) in self.neighbors.iter().enumerate() {
            for (k, n) in nb.iter().enumerate() {
                let Some(n) = *n else { continue };
                let Some(back) = self.neighbors[n].iter().position(|&m| m == Some(t)) else {
                    return false;
                };
                let mut a = self.face(t, k);
                let mut b = self.face(n, back);
                a.sort_unstable();
                b.sort_unstable();
                if a != b {
                    return false;
                }
            }
        }
        true
    }

    /// Number of `(tet, vertex)` pairs with the vertex strictly inside the
    /// tet's circumsphere by more than `tol` (absolute distance).
    pub fn delaunay_violations(&self, tol: f64) -> usize {
        let tree = KdTree::build(&self.vertices);
        let mut bad = 0;
        for (t, tet) in self.tets.iter().enumerate() {
            let [a, b, c, d] = self.corners(t);
            let (center, r) = circumsphere(&a, &b, &c, &d);
            if !(r.is_finite()) || r <= tol {
                continue;
            }
            bad += tree
                .within(&center, r - tol)
                .iter()
                .filter(|n| !tet.contains(&n.index))
                .count();
        }
        bad
    }
}

struct Builder {
    pts: Vec<Vec3>,
    tets: Vec<[u32; 4]>,
    nbr: Vec<[u32; 4]>,
    alive: Vec<bool>,
    free: Vec<u32>,
    last: u32,
    stamp: Vec<u32>,
    epoch: u32,
    cavity: Vec<u32>,
    stack: Vec<u32>,
    edges: HashMap<(u32, u32), (u32, u8)>,
}

impl Builder {
    fn orient_face(&self, t: u32, k: usize, p: &Vec3) -> f64 {
        let v = self.tets[t as usize];
        let f = TET_FACES[k];
        orient3d(
            &self.pts[v[f[0]] as usize],
            &self.pts[v[f[1]] as usize],
            &self.pts[v[f[2]] as usize],
            p,
        )
    }

    fn in_sphere(&self, t: u32, p: &Vec3) -> bool {
        let v = self.tets[t as usize].map(|i| &self.pts[i as usize]);
        insphere(v[0], v[1], v[2], v[3], p) > 0.0
    }

    fn locate(&self, p: &Vec3) -> u32 {
        let mut t = self.last;
        let limit = 4 * self.tets.len() + 16;
        for step in 0..limit {
            let mut next = None;
            for j in 0..4 {
                let k = (j + step) % 4;
                if self.orient_face(t, k, p) > 0.0 {
                    next = Some(self.nbr[t as usize][k]);
                    break;
                }
            }
            match next {
                None => return t,
                Some(n) if n != NONE => t = n,
                Some(_) => break,
            }
        }
        // Walk failed (cycling on round-off): scan for a tet containing p.
        (0..self.tets.len() as u32)
            .filter(|&t| self.alive[t as usize])
            .max_by(|&a, &b| {
                let worst = |t: u32| (0..4).map(|k| -self.orient_face(t, k, p)).fold(f64::INFINITY, f64::min);
                worst(a).total_cmp(&worst(b))
            })
            .expect("triangulation is never empty")
    }

    fn new_tet(&mut self, v: [u32; 4]) -> u32 {
        if let Some(t) = self.free.pop() {
            self.tets[t as usize] = v;
            self.nbr[t as usize] = [NONE; 4];
            self.alive[t as usize] = true;
            self.stamp[t as usize] = 0;
            t
        } else {
            self.tets.push(v);
            self.nbr.push([NONE; 4]);
            self.alive.push(true);
            self.stamp.push(0);
            (self.tets.len() - 1) as u32
        }
    }

    /// Returns false if the point could not be inserted.
    fn insert(&mut self, pi: u32) -> bool {
        let p = self.pts[pi as usize];
        let start = self.locate(&p);
        self.epoch += 2;
        let (in_cav, rejected) = (self.epoch, self.epoch + 1);

        self.cavity.clear();
        self.stack.clear();
        self.stamp[start as usize] = in_cav;
        self.cavity.push(start);
        self.stack.push(start);
        while let Some(t) = self.stack.pop() {
            for k in 0..4 {
                let n = self.nbr[t as usize][k];
                if n == NONE || self.stamp[n as usize] == in_cav || self.stamp[n as usize] == rejected {
                    continue;
                }
                if self.in_sphere(n, &p) {
                    self.stamp[n as usize] = in_cav;
                    self.cavity.push(n);
                    self.stack.push(n);
                } else {
                    self.stamp[n as usize] = rejected;
                }
            }
        }

        // Shrink until every boundary face sees p from the inside, so the
        // cavity is star-shaped despite round-off.
        loop {
            let mut changed = false;
            let mut k_idx = 0;
            while k_idx < self.cavity.len() {
                let t = self.cavity[k_idx];
                let visible = (0..4).all(|k| {
                    let n = self.nbr[t as usize][k];
                    let boundary = n == NONE || self.stamp[n as usize] != in_cav;
                    !boundary || self.orient_face(t, k, &p) < 0.0
                });
                if !visible {
                    if t == start {
                        return false;
                    }
                    self.stamp[t as usize] = rejected;
                    self.cavity.swap_remove(k_idx);
                    changed = true;
                } else {
                    k_idx += 1;
                }
            }
            if !changed {
                break;
            }
        }

        self.edges.clear();
        let cavity = std::mem::take(&mut self.cavity);
        let mut created = Vec::new();
        for &t in &cavity {
            for k in 0..4 {
                let n = self.nbr[t as usize][k];
                if n != NONE && self.stamp[n as usize] == in_cav {
                    continue;
                }
                let v = self.tets[t as usize];
                let f = TET_FACES[k].map(|j| v[j]);
                created.push((f, n, t));
            }
        }
        for &t in &cavity {
            self.alive[t as usize] = false;
        }
        let mut new_ids = Vec::with_capacity(created.len());
        for (f, outer, old) in created {
            let nt = self.new_tet([f[0], f[2], f[1], pi]);
            new_ids.push(nt);
            self.nbr[nt as usize][3] = outer;
            if outer != NONE {
                let back = self.nbr[outer as usize]
                    .iter()
                    .position(|&m| m == old)
                    .expect("adjacency is symmetric");
                self.nbr[outer as usize][back] = nt;
            }
            // Local faces 0, 1, 2 hold edges (f1,f2), (f0,f1), (f0,f2).
            for (local, (a, b)) in [(0u8, (f[1], f[2])), (1, (f[0], f[1])), (2, (f[0], f[2]))] {
                let key = (a.min(b), a.max(b));
                if let Some((other, ol)) = self.edges.remove(&key) {
                    self.nbr[nt as usize][local as usize] = other;
                    self.nbr[other as usize][ol as usize] = nt;
                } else {
                    self.edges.insert(key, (nt, local));
                }
            }
        }
        debug_assert!(self.edges.is_empty(), "cavity boundary is not a closed surface");
        for &t in &cavity {
            self.free.push(t);
        }
        self.cavity = cavity;
        self.last = *new_ids.last().expect("cavity has faces");
        true
    }
}

fn morton_key(p: &Vec3, bbox: &Aabb) -> u64 {
    let lo = bbox.lo();
    let ext = (bbox.hi() - lo).map(|e| if e > 0.0 { e } else { 1.0 });
    let spread = |x: u64| {
        let mut x = x & 0x1f_ffff;
        x = (x | (x << 32)) & 0x1f_0000_0000_ffff;
        x = (x | (x << 16)) & 0x1f_0000_ff00_00ff;
        x = (x | (x << 8)) & 0x100f_00f0_0f00_f00f;
        x = (x | (x << 4)) & 0x10c3_0c30_c30c_30c3;
        x = (x | (x << 2)) & 0x1249_2492_4924_9249;
        x
    };
    let q = |k: usize| (((p[k] - lo[k]) / ext[k]).clamp(0.0, 1.0) * 2_097_151.0) as u64;
    spread(q(0)) | (spread(q(1)) << 1) | (spread(q(2)) << 2)
}

/// Delaunay tetrahedralization of `points`.
///
/// Points closer than `1e-9` times the bounding-box diagonal to an earlier
/// point are merged into it. Tets touching the enclosing simplex are
/// dropped, so hull faces have no neighbor.
pub fn delaunay_tetrahedralize(points: &[Vec3]) -> Result<TetMesh, MeshingError> {
    if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(MeshingError::DegenerateInput("non-finite point".into()));
    }
    let bbox = Aabb::from_points(points);
    let diag = bbox.diagonal();
    if points.len() < 4 || !(diag > 0.0) {
        return Err(MeshingError::DegenerateInput(format!(
            "need at least 4 distinct points, got {}",
            points.len()
        )));
    }

    // Merge near-duplicates.
    let tol = JITTER * diag;
    let tree = KdTree::build(points);
    let mut input_vertex: Vec<Option<usize>> = vec![None; points.len()];
    let mut unique: Vec<usize> = Vec::new();
    for i in 0..points.len() {
        let rep = tree
            .within(&points[i], tol)
            .iter()
            .map(|n| n.index)
            .filter(|&j| j < i)
            .min();
        input_vertex[i] = match rep {
            Some(j) => input_vertex[j],
            None => {
                unique.push(i);
                Some(unique.len() - 1)
            }
        };
    }
    let n = unique.len();
    let originals: Vec<Vec3> = unique.iter().map(|&i| points[i]).collect();
    check_spanning(&originals, diag)?;

    let mut pts: Vec<Vec3> = originals
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let k = i as u64;
            p + Vec3::new(hash_unit(k, 0), hash_unit(k, 1), hash_unit(k, 2)) * (JITTER * diag)
        })
        .collect();

    let c = bbox.center();
    let s = 100.0 * diag;
    let mut sv = [
        c + Vec3::new(1.0, 1.0, 1.0) * s,
        c + Vec3::new(1.0, -1.0, -1.0) * s,
        c + Vec3::new(-1.0, 1.0, -1.0) * s,
        c + Vec3::new(-1.0, -1.0, 1.0) * s,
    ];
    if orient3d(&sv[0], &sv[1], &sv[2], &sv[3]) < 0.0 {
        sv.swap(2, 3);
    }
    pts.extend_from_slice(&sv);
    let super_ids = [n as u32, n as u32 + 1, n as u32 + 2, n as u32 + 3];

    let mut b = Builder {
        pts,
        tets: Vec::with_capacity(7 * n),
        nbr: Vec::with_capacity(7 * n),
        alive: Vec::with_capacity(7 * n),
        free: Vec::new(),
        last: 0,
        stamp: Vec::with_capacity(7 * n),
        epoch: 0,
        cavity: Vec::new(),
        stack: Vec::new(),
        edges: HashMap::new(),
    };
    b.new_tet(super_ids);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (morton_key(&b.pts[i], &bbox), i));
    let mut inserted = vec![true; n];
    for &i in &order {
        if !b.insert(i as u32) {
            log::warn!("delaunay: skipped point {i} on a degenerate cavity");
            inserted[i] = false;
        }
    }

    // Drop tets on the enclosing simplex and compact.
    let mut remap = vec![NONE; b.tets.len()];
    let mut tets = Vec::new();
    for t in 0..b.tets.len() {
        if b.alive[t] && b.tets[t].iter().all(|&v| (v as usize) < n) {
            remap[t] = tets.len() as u32;
            tets.push(b.tets[t].map(|v| v as usize));
        }
    }
    let mut neighbors = Vec::with_capacity(tets.len());
    for t in 0..b.tets.len() {
        if remap[t] == NONE {
            continue;
        }
        neighbors.push(b.nbr[t].map(|m| {
            if m == NONE || remap[m as usize] == NONE {
                None
            } else {
                Some(remap[m as usize] as usize)
            }
        }));
    }
    if tets.is_empty() {
        return Err(MeshingError::DegenerateInput("no tetrahedra survived".into()));
    }
    let input_vertex = input_vertex
        .into_iter()
        .map(|v| v.filter(|&v| inserted[v]))
        .collect();
    Ok(TetMesh {
        vertices: originals,
        tets,
        neighbors,
        input_vertex,
    })
}

fn check_spanning(pts: &[Vec3], diag: f64) -> Result<(), MeshingError> {
    let degenerate = |what: &str| Err(MeshingError::DegenerateInput(what.to_string()));
    if pts.len() < 4 {
        return degenerate("fewer than 4 distinct points");
    }
    let a = pts[0];
    let far = |f: &dyn Fn(&Vec3) -> f64| {
        pts.iter()
            .copied()
            .max_by(|p, q| f(p).total_cmp(&f(q)))
            .unwrap()
    };
    let b = far(&|p| (p - a).norm_squared());
    let ab = b - a;
    let c = far(&|p| ab.cross(&(p - a)).norm_squared());
    let normal = ab.cross(&(c - a));
    if normal.norm() <= 1e-12 * diag * diag {
        return degenerate("all points are collinear");
    }
    let d = far(&|p| normal.dot(&(p - a)).abs());
    if orient3d(&a, &b, &c, &d).abs() <= 1e-12 * diag * diag * diag {
        return degenerate("all points are coplanar");
    }
    Ok(())
}
