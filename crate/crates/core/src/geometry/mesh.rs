use std::collections::HashMap;

use super::bvh::{Aabb, Bvh};
use super::{GeometryError, RigidTransform, Vec3};

/// Result of a closest-point query.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClosestPoint {
    pub point: Vec3,
    pub distance: f64,
    pub triangle_id: usize,
    /// Barycentric weights of `point` on its triangle.
    pub barycentric: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    /// Ray parameter; equals the Euclidean distance when the direction is unit.
    pub t: f64,
    pub triangle_id: usize,
}

/// Indexed triangle mesh in meters with per-vertex unit normals and a BVH.
#[derive(Clone, Debug)]
pub struct TriangleMesh {
    vertices: Vec<Vec3>,
    triangles: Vec<[u32; 3]>,
    normals: Vec<Vec3>,
    watertight: bool,
    bvh: Bvh,
}

impl TriangleMesh {
    /// Builds a mesh; vertex normals are recomputed (area-weighted) when `normals` is `None`.
    pub fn new(
        vertices: Vec<Vec3>,
        triangles: Vec<[u32; 3]>,
        normals: Option<Vec<Vec3>>,
    ) -> Result<Self, GeometryError> {
        let n = vertices.len();
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(GeometryError::NonFinite);
        }
        for (i, t) in triangles.iter().enumerate() {
            if t.iter().any(|&k| k as usize >= n) {
                return Err(GeometryError::IndexOutOfRange { triangle: i });
            }
        }
        let normals = match normals {
            Some(ns) => {
                if ns.len() != n {
                    return Err(GeometryError::NormalCount {
                        expected: n,
                        got: ns.len(),
                    });
                }
                ns.into_iter()
                    .map(|v| v.try_normalize(1e-12).unwrap_or_else(Vec3::z))
                    .collect()
            }
            None => vertex_normals(&vertices, &triangles),
        };
        let watertight = is_closed(&vertices, &triangles);
        let boxes: Vec<Aabb> = triangles
            .iter()
            .map(|t| {
                let mut b = Aabb::empty();
                for &k in t {
                    b.grow(&vertices[k as usize]);
                }
                b
            })
            .collect();
        let bvh = Bvh::build(&boxes);
        Ok(Self {
            vertices,
            triangles,
            normals,
            watertight,
            bvh,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    /// Every edge (after welding coincident vertices) is shared by exactly two triangles.
    pub fn is_watertight(&self) -> bool {
        self.watertight
    }

    pub fn bounds(&self) -> Aabb {
        let mut b = Aabb::empty();
        for v in &self.vertices {
            b.grow(v);
        }
        b
    }

    #[inline]
    pub fn corners(&self, tri: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[tri];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    pub fn triangle_area(&self, tri: usize) -> f64 {
        let [a, b, c] = self.corners(tri);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn face_normal(&self, tri: usize) -> Vec3 {
        let [a, b, c] = self.corners(tri);
        (b - a).cross(&(c - a)).try_normalize(0.0).unwrap_or_else(Vec3::z)
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Normalized barycentric interpolation of the vertex normals.
    pub fn interpolated_normal(&self, tri: usize, bary: &Vec3) -> Vec3 {
        let [a, b, c] = self.triangles[tri];
        let n =
            self.normals[a as usize] * bary.x + self.normals[b as usize] * bary.y + self.normals[c as usize] * bary.z;
        n.try_normalize(1e-12).unwrap_or_else(|| self.face_normal(tri))
    }

    pub fn transformed(&self, tf: &RigidTransform) -> Self {
        let vertices = self.vertices.iter().map(|v| tf.apply_point(v)).collect();
        let normals = self.normals.iter().map(|n| tf.apply_vector(n)).collect();
        Self::new(vertices, self.triangles.clone(), Some(normals)).expect("rigid motion keeps mesh valid")
    }

    pub fn scaled(&self, s: f64) -> Result<Self, GeometryError> {
        let vertices = self.vertices.iter().map(|v| v * s).collect();
        let normals = if s < 0.0 {
            self.normals.iter().map(|n| -n).collect()
        } else {
            self.normals.clone()
        };
        Self::new(vertices, self.triangles.clone(), Some(normals))
    }

    /// Nearest surface point, accelerated by the BVH.
    pub fn closest_point(&self, query: &Vec3) -> Option<ClosestPoint> {
        let (tri, d2) = self.bvh.nearest(query, |t| {
            let [a, b, c] = self.corners(t);
            (closest_point_on_triangle(query, &a, &b, &c).0 - query).norm_squared()
        })?;
        let [a, b, c] = self.corners(tri);
        let (point, barycentric) = closest_point_on_triangle(query, &a, &b, &c);
        Some(ClosestPoint {
            point,
            distance: d2.sqrt(),
            triangle_id: tri,
            barycentric,
        })
    }

    /// Signed distance, negative inside. The sign is the majority vote of
    /// ray-parity tests along three fixed, skewed directions.
    pub fn signed_distance(&self, query: &Vec3) -> Result<f64, GeometryError> {
        if !self.watertight {
            return Err(GeometryError::NonWatertight);
        }
        let cp = self.closest_point(query).ok_or(GeometryError::EmptyMesh)?;
        if cp.distance == 0.0 {
            return Ok(0.0);
        }
        Ok(if self.contains(query) {
            -cp.distance
        } else {
            cp.distance
        })
    }

    /// Inside test by majority vote over three ray-parity counts.
    pub fn contains(&self, query: &Vec3) -> bool {
        // Arbitrary directions, chosen to avoid axis-aligned edges.
        #[allow(clippy::approx_constant)]
        const DIRS: [[f64; 3]; 3] = [
            [0.577_215_664_9, 0.318_309_886_1, 0.751_988_713_3],
            [-0.414_213_562_3, 0.732_050_807_5, -0.541_196_100_1],
            [0.236_067_977_5, -0.618_033_988_7, -0.749_894_209_3],
        ];
        let votes = DIRS
            .iter()
            .filter(|d| {
                let dir = Vec3::new(d[0], d[1], d[2]).normalize();
                self.count_crossings(query, &dir) % 2 == 1
            })
            .count();
        votes >= 2
    }

    /// Number of triangle crossings along the half-line `origin + t·dir`, `t > 0`.
    pub fn count_crossings(&self, origin: &Vec3, dir: &Vec3) -> usize {
        let mut count = 0;
        self.bvh.visit_ray(origin, dir, f64::INFINITY, |t| {
            let [a, b, c] = self.corners(t);
            if ray_triangle(origin, dir, &a, &b, &c).is_some_and(|h| h > 0.0) {
                count += 1;
            }
            None
        });
        count
    }

    /// First hit with `t_min < t < t_max`; lowest triangle id wins exact ties.
    pub fn raycast(&self, origin: &Vec3, dir: &Vec3, t_min: f64, t_max: f64) -> Option<RayHit> {
        let mut best: Option<RayHit> = None;
        self.bvh.visit_ray(origin, dir, t_max, |tri| {
            let [a, b, c] = self.corners(tri);
            let t = ray_triangle(origin, dir, &a, &b, &c)?;
            if t <= t_min || t >= t_max {
                return None;
            }
            let better = match best {
                None => true,
                Some(h) => t < h.t || (t == h.t && tri < h.triangle_id),
            };
            if better {
                best = Some(RayHit { t, triangle_id: tri });
            }
            // Keep ties reachable: only shrink strictly past the hit.
            Some(t.next_up())
        });
        best
    }
}

fn vertex_normals(vertices: &[Vec3], triangles: &[[u32; 3]]) -> Vec<Vec3> {
    let mut acc = vec![Vec3::zeros(); vertices.len()];
    for t in triangles {
        let [a, b, c] = t.map(|k| vertices[k as usize]);
        // Cross product length is twice the area: area weighting for free.
        let n = (b - a).cross(&(c - a));
        for &k in t {
            acc[k as usize] += n;
        }
    }
    acc.into_iter()
        .map(|n| n.try_normalize(1e-300).unwrap_or_else(Vec3::z))
        .collect()
}

fn is_closed(vertices: &[Vec3], triangles: &[[u32; 3]]) -> bool {
    if triangles.is_empty() {
        return false;
    }
    // Weld by exact position so flat-shaded meshes with split vertices count.
    let mut ids: HashMap<[u64; 3], u32> = HashMap::new();
    let welded: Vec<u32> = vertices
        .iter()
        .map(|v| {
            let key = [v.x, v.y, v.z].map(|c| (c + 0.0).to_bits());
            let next = ids.len() as u32;
            *ids.entry(key).or_insert(next)
        })
        .collect();
    let mut edges: HashMap<(u32, u32), u32> = HashMap::new();
    for t in triangles {
        for k in 0..3 {
            let a = welded[t[k] as usize];
            let b = welded[t[(k + 1) % 3] as usize];
            if a == b {
                continue;
            }
            *edges.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    edges.values().all(|&c| c == 2)
}

/// Closest point on triangle `abc` to `p` by Voronoi-region classification.
/// Returns the point and its barycentric weights.
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, Vec3) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, Vec3::new(1.0, 0.0, 0.0));
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, Vec3::new(0.0, 1.0, 0.0));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, Vec3::new(1.0 - v, v, 0.0));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, Vec3::new(0.0, 0.0, 1.0));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, Vec3::new(1.0 - w, 0.0, w));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, Vec3::new(0.0, 1.0 - w, w));
    }
    let denom = va + vb + vc;
    if denom == 0.0 {
        // Degenerate (collinear) triangle: fall back to the nearest edge.
        let cands = [
            (closest_on_segment(p, a, b), 0),
            (closest_on_segment(p, b, c), 1),
            (closest_on_segment(p, a, c), 2),
        ];
        let ((q, s), e) = cands
            .into_iter()
            .min_by(|x, y| (x.0 .0 - p).norm_squared().total_cmp(&(y.0 .0 - p).norm_squared()))
            .unwrap();
        let bary = match e {
            0 => Vec3::new(1.0 - s, s, 0.0),
            1 => Vec3::new(0.0, 1.0 - s, s),
            _ => Vec3::new(1.0 - s, 0.0, s),
        };
        return (q, bary);
    }
    let v = vb / denom;
    let w = vc / denom;
    (a + ab * v + ac * w, Vec3::new(1.0 - v - w, v, w))
}

fn closest_on_segment(p: &Vec3, a: &Vec3, b: &Vec3) -> (Vec3, f64) {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return (*a, 0.0);
    }
    let s = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    (a + ab * s, s)
}

/// Möller–Trumbore, double-sided. Returns the ray parameter of the hit.
#[inline]
pub fn ray_triangle(origin: &Vec3, dir: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<f64> {
    let e1 = b - a;
    let e2 = c - a;
    let pvec = dir.cross(&e2);
    let det = e1.dot(&pvec);
    if det.abs() < 1e-300 {
        return None;
    }
    let inv = 1.0 / det;
    let tvec = origin - a;
    let u = tvec.dot(&pvec) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(&e1);
    let v = dir.dot(&qvec) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&qvec) * inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;

    #[test]
    fn rejects_out_of_range_index() {
        let err = TriangleMesh::new(vec![Vec3::zeros(); 3], vec![[0, 1, 3]], None).unwrap_err();
        assert!(matches!(err, GeometryError::IndexOutOfRange { triangle: 0 }));
    }

    #[test]
    fn cube_is_watertight_plate_square_is_not() {
        assert!(primitives::cuboid(Vec3::repeat(0.5)).is_watertight());
        assert!(!primitives::square(0.1).is_watertight());
    }

    #[test]
    fn closest_point_at_vertex() {
        let cube = primitives::cuboid(Vec3::repeat(0.5));
        let v = cube.vertices()[3];
        let cp = cube.closest_point(&v).unwrap();
        assert_eq!(cp.distance, 0.0);
        assert_eq!(cp.point, v);
    }

    #[test]
    fn closest_point_above_cube() {
        let cube = primitives::cuboid(Vec3::repeat(0.5));
        let cp = cube.closest_point(&Vec3::new(0.0, 0.0, 2.0)).unwrap();
        assert!((cp.point - Vec3::new(0.0, 0.0, 0.5)).norm() < 1e-12);
        assert!((cp.distance - 1.5).abs() < 1e-12);
    }

    #[test]
    fn signed_distance_cube_center_and_surface() {
        let cube = primitives::cuboid(Vec3::repeat(0.5));
        assert!((cube.signed_distance(&Vec3::zeros()).unwrap() + 0.5).abs() < 1e-12);
        let on = cube.signed_distance(&Vec3::new(0.1, 0.2, 0.5)).unwrap();
        assert!(on.abs() < 1e-9);
    }

    #[test]
    fn signed_distance_sphere() {
        let sphere = primitives::icosphere(0.5, 4);
        let d = sphere.signed_distance(&Vec3::new(0.0, 0.0, 1.0)).unwrap();
        // Vertices lie on the sphere; faces sag inward by at most ~1 mm at this level.
        assert!((d - 0.5).abs() < 2e-3, "{d}");
        assert!(sphere.signed_distance(&Vec3::new(0.1, 0.0, 0.0)).unwrap() < 0.0);
    }

    #[test]
    fn signed_distance_needs_closed_mesh() {
        let sq = primitives::square(0.1);
        assert!(matches!(
            sq.signed_distance(&Vec3::z()),
            Err(GeometryError::NonWatertight)
        ));
    }

    #[test]
    fn raycast_hits_front_face() {
        let cube = primitives::cuboid(Vec3::repeat(0.5));
        let hit = cube
            .raycast(&Vec3::new(0.1, 0.1, -2.0), &Vec3::z(), 0.0, f64::INFINITY)
            .unwrap();
        assert!((hit.t - 1.5).abs() < 1e-12);
    }
}
