//! Static, exact k-d tree over 3D points.
//!
//! The tree is implicit: after construction the median of every index range
//! `[lo, hi)` sits at `(lo + hi) / 2`, with the smaller half on the left.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::math::Vec3;

#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<[f64; 3]>,
    /// Original index of each slot.
    index: Vec<usize>,
    /// Split axis of the node whose median sits in each slot.
    axis: Vec<u8>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub index: usize,
    pub dist_sq: f64,
}

impl Eq for Neighbor {}

impl PartialOrd for Neighbor {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Neighbor {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

impl KdTree {
    pub fn build(points: &[Vec3]) -> Self {
        let mut slots: Vec<([f64; 3], usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| ([p.x, p.y, p.z], i))
            .collect();
        let mut axis = vec![0u8; slots.len()];
        build_range(&mut slots, &mut axis);
        let (points, index) = slots.into_iter().unzip();
        Self { points, index, axis }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn nearest(&self, q: &Vec3) -> Option<Neighbor> {
        self.knn(q, 1).into_iter().next()
    }

    /// The `k` nearest points, closest first. Ties break by original index.
    pub fn knn(&self, q: &Vec3, k: usize) -> Vec<Neighbor> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let q = [q.x, q.y, q.z];
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_range(&q, k, 0, self.points.len(), &mut heap);
        heap.into_sorted_vec()
    }

    /// All points within `radius` of `q`, unordered.
    pub fn within(&self, q: &Vec3, radius: f64) -> Vec<Neighbor> {
        let mut out = Vec::new();
        let q = [q.x, q.y, q.z];
        self.within_range(&q, radius * radius, 0, self.points.len(), &mut out);
        out
    }

    fn knn_range(
        &self,
        q: &[f64; 3],
        k: usize,
        lo: usize,
        hi: usize,
        heap: &mut BinaryHeap<Neighbor>,
    ) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let p = &self.points[mid];
        let cand = Neighbor {
            index: self.index[mid],
            dist_sq: dist_sq(p, q),
        };
        if heap.len() < k {
            heap.push(cand);
        } else if cand < *heap.peek().unwrap() {
            heap.pop();
            heap.push(cand);
        }
        let ax = self.axis[mid] as usize;
        let delta = q[ax] - p[ax];
        let (near, far) = if delta < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.knn_range(q, k, near.0, near.1, heap);
        if heap.len() < k || delta * delta <= heap.peek().unwrap().dist_sq {
            self.knn_range(q, k, far.0, far.1, heap);
        }
    }

    fn within_range(&self, q: &[f64; 3], r2: f64, lo: usize, hi: usize, out: &mut Vec<Neighbor>) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let p = &self.points[mid];
        let d2 = dist_sq(p, q);
        if d2 <= r2 {
            out.push(Neighbor {
                index: self.index[mid],
                dist_sq: d2,
            });
        }
        let ax = self.axis[mid] as usize;
        let delta = q[ax] - p[ax];
        if delta < 0.0 || delta * delta <= r2 {
            self.within_range(q, r2, lo, mid, out);
        }
        if delta >= 0.0 || delta * delta <= r2 {
            self.within_range(q, r2, mid + 1, hi, out);
        }
    }
}

#[inline]
fn dist_sq(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

fn build_range(slots: &mut [([f64; 3], usize)], axis: &mut [u8]) {
    if slots.is_empty() {
        return;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (p, _) in slots.iter() {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let ax = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
        .unwrap();
    let mid = slots.len() / 2;
    slots.select_nth_unstable_by(mid, |a, b| a.0[ax].total_cmp(&b.0[ax]));
    axis[mid] = ax as u8;
    let (left, rest) = slots.split_at_mut(mid);
    let (axis_left, axis_rest) = axis.split_at_mut(mid);
    build_range(left, axis_left);
    build_range(&mut rest[1..], &mut axis_rest[1..]);
}
