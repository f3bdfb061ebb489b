//! Bounding volume hierarchy over axis-aligned boxes.
//!
//! Used both for Gaussian support ellipsoids (ray culling, point queries) and
//! for mesh triangles (first-hit ray casting).

use crate::math::{Aabb, Vec3};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Debug)]
struct Node {
    bounds: Aabb,
    /// Leaf: `[start, start + count)` into `order`. Inner: `start` is the
    /// right child, the left child is the next node.
    start: u32,
    count: u32,
}

#[derive(Clone, Debug, Default)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
    boxes: Vec<Aabb>,
}

impl Bvh {
    pub fn build(boxes: &[Aabb]) -> Self {
        if boxes.is_empty() {
            return Self::default();
        }
        let centroids: Vec<Vec3> = boxes.iter().map(Aabb::center).collect();
        let mut order: Vec<u32> = (0..boxes.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * boxes.len() / LEAF_SIZE + 1);
        build_node(boxes, &centroids, &mut order, 0, &mut nodes);
        Self {
            nodes,
            order,
            boxes: boxes.to_vec(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn bounds(&self) -> Option<Aabb> {
        self.nodes.first().map(|n| n.bounds)
    }

    /// Calls `f` for every primitive whose box overlaps the ray segment
    /// `[t_min, t_max]`.
    pub fn for_each_on_ray(
        &self,
        origin: &Vec3,
        dir: &Vec3,
        t_min: f64,
        t_max: f64,
        mut f: impl FnMut(usize),
    ) {
        if self.nodes.is_empty() {
            return;
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if node.bounds.ray_interval(origin, &inv, t_min, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                for &p in &self.order[s..s + node.count as usize] {
                    if self.boxes[p as usize].ray_interval(origin, &inv, t_min, t_max).is_some() {
                        f(p as usize);
                    }
                }
            } else {
                stack.push(node.start as usize);
                stack.push(i + 1);
            }
        }
    }

    /// Calls `f` for every primitive whose box contains `p`.
    pub fn for_each_containing(&self, p: &Vec3, mut f: impl FnMut(usize)) {
        if self.nodes.is_empty() {
            return;
        }
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if !node.bounds.contains(p) {
                continue;
            }
            if node.count > 0 {
                let s = node.start as usize;
                for &q in &self.order[s..s + node.count as usize] {
                    if self.boxes[q as usize].contains(p) {
                        f(q as usize);
                    }
                }
            } else {
                stack.push(node.start as usize);
                stack.push(i + 1);
            }
        }
    }

    /// Closest intersection along a ray. `hit(prim, t_max)` returns the hit
    /// distance if the primitive is hit before `t_max`.
    pub fn closest_hit(
        &self,
        origin: &Vec3,
        dir: &Vec3,
        t_max: f64,
        mut hit: impl FnMut(usize, f64) -> Option<f64>,
    ) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut best: Option<(usize, f64)> = None;
        let mut limit = t_max;
        let mut stack: Vec<(usize, f64)> = Vec::with_capacity(64);
        if let Some((t0, _)) = self.nodes[0].bounds.ray_interval(origin, &inv, 0.0, limit) {
            stack.push((0, t0));
        }
        while let Some((i, t_enter)) = stack.pop() {
            if t_enter > limit {
                continue;
            }
            let node = &self.nodes[i];
            if node.count > 0 {
                let s = node.start as usize;
                for &p in &self.order[s..s + node.count as usize] {
                    if let Some(t) = hit(p as usize, limit) {
                        if t < limit {
                            limit = t;
                            best = Some((p as usize, t));
                        }
                    }
                }
                continue;
            }
            let children = [i + 1, node.start as usize];
            let mut hits: Vec<(usize, f64)> = children
                .iter()
                .filter_map(|&c| {
                    self.nodes[c]
                        .bounds
                        .ray_interval(origin, &inv, 0.0, limit)
                        .map(|(t0, _)| (c, t0))
                })
                .collect();
            // Push the far child first so the near one is popped next.
            hits.sort_by(|a, b| b.1.total_cmp(&a.1));
            stack.extend(hits);
        }
        best
    }
}

impl Bvh {
    /// Nearest primitive to `p`. `dist(prim, best)` returns the exact
    /// distance to the primitive; `best` allows early rejection.
    pub fn nearest(&self, p: &Vec3, mut dist: impl FnMut(usize, f64) -> f64) -> Option<(usize, f64)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        let mut limit = f64::INFINITY;
        let mut stack: Vec<(usize, f64)> = vec![(0, box_distance(&self.nodes[0].bounds, p))];
        while let Some((i, d)) = stack.pop() {
            if d >= limit {
                continue;
            }
            let node = &self.nodes[i];
            if node.count > 0 {
                let s = node.start as usize;
                for &q in &self.order[s..s + node.count as usize] {
                    if box_distance(&self.boxes[q as usize], p) >= limit {
                        continue;
                    }
                    let dq = dist(q as usize, limit);
                    if dq < limit {
                        limit = dq;
                        best = Some((q as usize, dq));
                    }
                }
                continue;
            }
            let a = (i + 1, box_distance(&self.nodes[i + 1].bounds, p));
            let b = (node.start as usize, box_distance(&self.nodes[node.start as usize].bounds, p));
            if a.1 < b.1 {
                stack.push(b);
                stack.push(a);
            } else {
                stack.push(a);
                stack.push(b);
            }
        }
        best
    }
}

fn box_distance(b: &Aabb, p: &Vec3) -> f64 {
    let lo = b.lo();
    let hi = b.hi();
    let d = Vec3::new(
        (lo.x - p.x).max(p.x - hi.x).max(0.0),
        (lo.y - p.y).max(p.y - hi.y).max(0.0),
        (lo.z - p.z).max(p.z - hi.z).max(0.0),
    );
    d.norm()
}

fn build_node(
    boxes: &[Aabb],
    centroids: &[Vec3],
    order: &mut [u32],
    offset: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let bounds = order
        .iter()
        .fold(Aabb::empty(), |acc, &i| acc.union(&boxes[i as usize]));
    let me = nodes.len();
    nodes.push(Node {
        bounds,
        start: offset as u32,
        count: order.len() as u32,
    });
    if order.len() <= LEAF_SIZE {
        return me;
    }
    let cbox = Aabb::from_points(order.iter().map(|&i| &centroids[i as usize]));
    let axis = cbox.longest_axis();
    if cbox.hi()[axis] - cbox.lo()[axis] <= 0.0 {
        // All centroids coincide; no split can separate them.
        return me;
    }
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| {
        centroids[a as usize][axis].total_cmp(&centroids[b as usize][axis])
    });
    let (left, right) = order.split_at_mut(mid);
    build_node(boxes, centroids, left, offset, nodes);
    let right_idx = build_node(boxes, centroids, right, offset + mid, nodes);
    nodes[me].start = right_idx as u32;
    nodes[me].count = 0;
    me
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_boxes(n: usize) -> Vec<Aabb> {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        (0..n)
            .map(|_| {
                let c = Vec3::new(rng.random(), rng.random(), rng.random()) * 4.0;
                let h = Vec3::new(rng.random(), rng.random(), rng.random()) * 0.2;
                Aabb::new(c - h, c + h)
            })
            .collect()
    }

    #[test]
    fn ray_query_matches_brute_force() {
        let boxes = random_boxes(400);
        let bvh = Bvh::build(&boxes);
        let o = Vec3::new(-1.0, 0.3, 0.2);
        let d = Vec3::new(1.0, 0.4, 0.5).normalize();
        let inv = d.map(|x| 1.0 / x);
        let mut got = Vec::new();
        bvh.for_each_on_ray(&o, &d, 0.0, 4.0, |i| got.push(i));
        got.sort();
        let want: Vec<usize> = (0..boxes.len())
            .filter(|&i| boxes[i].ray_interval(&o, &inv, 0.0, 4.0).is_some())
            .collect();
        assert_eq!(got, want);
    }

    #[test]
    fn point_query_matches_brute_force() {
        let boxes = random_boxes(400);
        let bvh = Bvh::build(&boxes);
        let p = Vec3::new(2.0, 2.0, 2.0);
        let mut got = Vec::new();
        bvh.for_each_containing(&p, |i| got.push(i));
        got.sort();
        let want: Vec<usize> = (0..boxes.len()).filter(|&i| boxes[i].contains(&p)).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn nearest_matches_brute_force() {
        let boxes = random_boxes(300);
        let bvh = Bvh::build(&boxes);
        let centers: Vec<Vec3> = boxes.iter().map(Aabb::center).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let q = Vec3::new(rng.random(), rng.random(), rng.random()) * 5.0 - Vec3::repeat(0.5);
            let (_, d) = bvh.nearest(&q, |i, _| (centers[i] - q).norm()).unwrap();
            let want = centers.iter().map(|c| (c - q).norm()).fold(f64::INFINITY, f64::min);
            assert_eq!(d, want);
        }
    }
}
