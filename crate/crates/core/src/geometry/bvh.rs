//! Axis-aligned bounding-volume hierarchy over triangles.
//!
//! Construction splits at the median centroid along the widest axis, with a
//! stable sort on (centroid, index), so the tree is a pure function of the
//! triangle list.

use super::Vec3;

const LEAF_SIZE: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Self {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn merge(&mut self, other: &Aabb) {
        self.min = self.min.inf(&other.min);
        self.max = self.max.sup(&other.max);
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    /// Squared distance from `p` to the box (0 inside).
    #[inline]
    pub fn distance_sq(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }

    /// Slab test; returns the entry parameter if the ray hits within `[0, t_max]`.
    #[inline]
    pub fn ray_entry(&self, origin: &Vec3, inv_dir: &Vec3, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for i in 0..3 {
            let a = (self.min[i] - origin[i]) * inv_dir[i];
            let b = (self.max[i] - origin[i]) * inv_dir[i];
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            // NaN from 0 * inf means the origin lies on a slab plane of a
            // zero-direction axis; treat as inside that slab.
            if !lo.is_nan() {
                t0 = t0.max(lo);
            }
            if !hi.is_nan() {
                t1 = t1.min(hi);
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Clone, Debug)]
enum Node {
    Leaf { bounds: Aabb, start: usize, len: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Triangle ids in leaf order.
    order: Vec<usize>,
}

impl Bvh {
    pub fn build(boxes: &[Aabb]) -> Self {
        let mut order: Vec<usize> = (0..boxes.len()).collect();
        let centroids: Vec<Vec3> = boxes.iter().map(|b| b.center()).collect();
        let mut nodes = Vec::with_capacity(2 * boxes.len() / LEAF_SIZE + 1);
        if !boxes.is_empty() {
            build_recursive(boxes, &centroids, &mut order, 0, boxes.len(), &mut nodes);
        }
        Self { nodes, order }
    }

    /// Branch-and-bound nearest primitive. `dist_sq(id)` is the exact squared
    /// distance to primitive `id`; the result is `(id, dist_sq)` with the
    /// lowest id winning ties.
    pub fn nearest<F>(&self, query: &Vec3, mut dist_sq: F) -> Option<(usize, f64)>
    where
        F: FnMut(usize) -> f64,
    {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(usize, f64)> = None;
        let mut stack = vec![(0usize, self.nodes[0].bounds().distance_sq(query))];
        while let Some((idx, lower)) = stack.pop() {
            if let Some((_, b)) = best {
                if lower > b {
                    continue;
                }
            }
            match &self.nodes[idx] {
                Node::Leaf { start, len, .. } => {
                    for &tri in &self.order[*start..*start + *len] {
                        let d = dist_sq(tri);
                        let better = match best {
                            None => true,
                            Some((bt, bd)) => d < bd || (d == bd && tri < bt),
                        };
                        if better {
                            best = Some((tri, d));
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[*left].bounds().distance_sq(query);
                    let dr = self.nodes[*right].bounds().distance_sq(query);
                    // Visit the nearer child first.
                    if dl <= dr {
                        stack.push((*right, dr));
                        stack.push((*left, dl));
                    } else {
                        stack.push((*left, dl));
                        stack.push((*right, dr));
                    }
                }
            }
        }
        best
    }

    /// Visits every primitive whose box the ray segment `[0, t_max]` enters.
    pub fn visit_ray<F>(&self, origin: &Vec3, dir: &Vec3, t_max: f64, mut visit: F)
    where
        F: FnMut(usize) -> Option<f64>,
    {
        if self.nodes.is_empty() {
            return;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut t_max = t_max;
        let mut stack = vec![0usize];
        while let Some(idx) = stack.pop() {
            let node = &self.nodes[idx];
            if node.bounds().ray_entry(origin, &inv, t_max).is_none() {
                continue;
            }
            match node {
                Node::Leaf { start, len, .. } => {
                    for &tri in &self.order[*start..*start + *len] {
                        if let Some(shrink) = visit(tri) {
                            t_max = t_max.min(shrink);
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(*right);
                    stack.push(*left);
                }
            }
        }
    }
}

fn build_recursive(
    boxes: &[Aabb],
    centroids: &[Vec3],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &i in &order[start..end] {
        bounds.merge(&boxes[i]);
        cbounds.grow(&centroids[i]);
    }
    let idx = nodes.len();
    let len = end - start;
    let ext = cbounds.extent();
    if len <= LEAF_SIZE || ext.max() <= 0.0 {
        nodes.push(Node::Leaf { bounds, start, len });
        return idx;
    }
    let axis = ext.imax();
    order[start..end].sort_by(|&a, &b| centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b)));
    let mid = start + len / 2;
    nodes.push(Node::Leaf { bounds, start, len: 0 });
    let left = build_recursive(boxes, centroids, order, start, mid, nodes);
    let right = build_recursive(boxes, centroids, order, mid, end, nodes);
    nodes[idx] = Node::Inner { bounds, left, right };
    idx
}
