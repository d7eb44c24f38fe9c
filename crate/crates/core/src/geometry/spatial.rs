//! Point indices: an exact k-d tree for nearest neighbors and a hashed
//! uniform grid for box/radius range queries.

use std::collections::HashMap;

use super::bvh::Aabb;
use super::Vec3;

const KD_LEAF: usize = 8;

#[derive(Clone, Debug)]
enum KdNode {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Exact nearest-neighbor tree. Ties resolve to the lowest point index.
#[derive(Clone, Debug)]
pub struct KdTree {
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<KdNode>,
}

impl KdTree {
    pub fn new(points: &[Vec3]) -> Self {
        let mut tree = Self {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            let n = points.len();
            tree.build(0, n);
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let idx = self.nodes.len();
        if end - start <= KD_LEAF {
            self.nodes.push(KdNode::Leaf { start, end });
            return idx;
        }
        let mut b = Aabb::empty();
        for &i in &self.order[start..end] {
            b.grow(&self.points[i]);
        }
        let axis = b.extent().imax();
        let mid = start + (end - start) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &c| {
            pts[a][axis].total_cmp(&pts[c][axis]).then(a.cmp(&c))
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(KdNode::Leaf { start, end });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[idx] = KdNode::Split {
            axis,
            value,
            left,
            right,
        };
        idx
    }

    /// Index and Euclidean distance of the nearest point.
    pub fn nearest(&self, q: &Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = (usize::MAX, f64::INFINITY);
        self.search(0, q, &mut best);
        Some((best.0, best.1.sqrt()))
    }

    fn search(&self, node: usize, q: &Vec3, best: &mut (usize, f64)) {
        match self.nodes[node] {
            KdNode::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let d = (self.points[i] - q).norm_squared();
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            KdNode::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, best);
                // `<=` keeps equal-distance candidates on the far side reachable.
                if diff * diff <= best.1 {
                    self.search(far, q, best);
                }
            }
        }
    }
}

/// Hashed uniform grid over a point set.
#[derive(Clone, Debug)]
pub struct PointGrid {
    cell: f64,
    points: Vec<Vec3>,
    cells: HashMap<[i64; 3], Vec<u32>>,
}

impl PointGrid {
    pub fn new(points: Vec<Vec3>, cell: f64) -> Self {
        assert!(cell > 0.0);
        let mut cells: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key(p, cell)).or_default().push(i as u32);
        }
        Self { cell, points, cells }
    }

    #[inline]
    fn key(p: &Vec3, cell: f64) -> [i64; 3] {
        [
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        ]
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of points within the closed ball, in ascending order.
    pub fn within_radius(&self, center: &Vec3, radius: f64) -> Vec<usize> {
        let r2 = radius * radius;
        let mut out = Vec::new();
        self.for_each_in_box(
            &(center - Vec3::repeat(radius)),
            &(center + Vec3::repeat(radius)),
            |i| {
                if (self.points[i] - center).norm_squared() <= r2 {
                    out.push(i);
                }
            },
        );
        out.sort_unstable();
        out
    }

    /// Calls `f` for every point inside the closed box (unordered).
    pub fn for_each_in_box<F: FnMut(usize)>(&self, min: &Vec3, max: &Vec3, mut f: F) {
        let lo = Self::key(min, self.cell);
        let hi = Self::key(max, self.cell);
        let span = (hi[0] - lo[0] + 1) * (hi[1] - lo[1] + 1) * (hi[2] - lo[2] + 1);
        if span as usize > self.cells.len() {
            // Sparse occupancy: scanning occupied cells is cheaper.
            for (k, ids) in &self.cells {
                if (0..3).all(|a| k[a] >= lo[a] && k[a] <= hi[a]) {
                    self.emit(ids, min, max, &mut f);
                }
            }
            return;
        }
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    if let Some(ids) = self.cells.get(&[x, y, z]) {
                        self.emit(ids, min, max, &mut f);
                    }
                }
            }
        }
    }

    fn emit<F: FnMut(usize)>(&self, ids: &[u32], min: &Vec3, max: &Vec3, f: &mut F) {
        for &i in ids {
            let p = &self.points[i as usize];
            if (0..3).all(|a| p[a] >= min[a] && p[a] <= max[a]) {
                f(i as usize);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()))
            .collect()
    }

    #[test]
    fn kdtree_matches_scan() {
        let pts = cloud(2000, 1);
        let tree = KdTree::new(&pts);
        for q in cloud(300, 2) {
            let (i, d) = tree.nearest(&q).unwrap();
            let best = pts.iter().map(|p| (p - q).norm()).fold(f64::INFINITY, f64::min);
            assert_eq!(d, best);
            assert_eq!((pts[i] - q).norm(), best);
        }
    }

    #[test]
    fn kdtree_duplicate_points_pick_lowest_index() {
        let pts = vec![Vec3::new(1.0, 0.0, 0.0); 20];
        let tree = KdTree::new(&pts);
        assert_eq!(tree.nearest(&Vec3::zeros()).unwrap().0, 0);
    }

    #[test]
    fn grid_radius_matches_scan() {
        let pts = cloud(3000, 3);
        let grid = PointGrid::new(pts.clone(), 0.05);
        let c = Vec3::new(0.4, 0.5, 0.6);
        let expect: Vec<usize> = (0..pts.len()).filter(|&i| (pts[i] - c).norm() <= 0.17).collect();
        assert_eq!(grid.within_radius(&c, 0.17), expect);
    }
}
