//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use graspkit::geometry::{rotation_from_uniform, RigidTransform, TriangleMesh, Vec3};
use graspkit::scene::Scene;
use graspkit::{GraspPose, GripperModel};
use rand::Rng;

/// Möller–Trumbore, written out again so the oracle shares no code with the crate.
pub fn ray_tri(o: &Vec3, d: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Option<f64> {
    let (e1, e2) = (b - a, c - a);
    let p = d.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-300 {
        return None;
    }
    let s = o - a;
    let u = s.dot(&p) / det;
    let q = s.cross(&e1);
    let v = d.dot(&q) / det;
    if !(0.0..=1.0).contains(&u) || v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) / det)
}

/// Nearest positive hit over every triangle of every object, plus the plane
/// as id 0.
pub fn scene_ray_scan(scene: &Scene, o: &Vec3, d: &Vec3) -> Option<(f64, u32)> {
    let mut best: Option<(f64, u32)> = None;
    for (obj, m) in scene.objects().iter().zip(scene.world_meshes()) {
        for t in m.triangles() {
            let [a, b, c] = t.map(|k| m.vertices()[k as usize]);
            if let Some(h) = ray_tri(o, d, &a, &b, &c) {
                if h > 0.0 && best.is_none_or(|(bt, _)| h < bt) {
                    best = Some((h, obj.id));
                }
            }
        }
    }
    if let (Some(z), true) = (scene.support_plane(), d.z != 0.0) {
        let t = (z - o.z) / d.z;
        if t > 0.0 && best.is_none_or(|(bt, _)| t < bt) {
            best = Some((t, 0));
        }
    }
    best
}

/// Oriented boxes of the gripper solid in world coordinates, built from the
/// gripper parameters: (center, axes, half extents).
pub fn gripper_obbs(g: &GraspPose, gr: &GripperModel) -> Vec<(Vec3, [Vec3; 3], Vec3)> {
    let r = g.rotation();
    let axes = [
        r.column(0).into_owned(),
        r.column(1).into_owned(),
        r.column(2).into_owned(),
    ];
    let (hw, t, hh) = (g.width / 2.0, gr.finger_thickness, gr.finger_height / 2.0);
    let finger_len = g.depth + gr.base_depth;
    let finger_cx = (g.depth - gr.base_depth) / 2.0;
    let local = [
        (
            Vec3::new(finger_cx, hw + t / 2.0, 0.0),
            Vec3::new(finger_len / 2.0, t / 2.0, hh),
        ),
        (
            Vec3::new(finger_cx, -hw - t / 2.0, 0.0),
            Vec3::new(finger_len / 2.0, t / 2.0, hh),
        ),
        (
            Vec3::new(-gr.base_depth - t / 2.0, 0.0, 0.0),
            Vec3::new(t / 2.0, hw + t, hh),
        ),
    ];
    local
        .iter()
        .map(|(c, h)| (g.anchor + axes[0] * c.x + axes[1] * c.y + axes[2] * c.z, axes, *h))
        .collect()
}

pub fn in_obb(p: &Vec3, (c, axes, h): &(Vec3, [Vec3; 3], Vec3)) -> bool {
    let d = p - c;
    (0..3).all(|i| d.dot(&axes[i]).abs() <= h[i])
}

/// Any point inside any gripper box, or any box corner below the plane.
pub fn collides_bruteforce(g: &GraspPose, gr: &GripperModel, points: &[Vec3], plane: Option<f64>) -> bool {
    let boxes = gripper_obbs(g, gr);
    if let Some(z) = plane {
        for (c, a, h) in &boxes {
            for s in 0..8 {
                let sg = |k: usize| if s >> k & 1 == 1 { 1.0 } else { -1.0 };
                let corner = c + a[0] * (sg(0) * h.x) + a[1] * (sg(1) * h.y) + a[2] * (sg(2) * h.z);
                if corner.z < z {
                    return true;
                }
            }
        }
    }
    points.iter().any(|p| boxes.iter().any(|b| in_obb(p, b)))
}

pub fn nearest_scan(q: &Vec3, set: &[Vec3]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, p) in set.iter().enumerate() {
        let d = (p - q).norm();
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

pub fn chamfer_scan(a: &[Vec3], b: &[Vec3]) -> f64 {
    let ab = a.iter().map(|p| nearest_scan(p, b).1).sum::<f64>() / a.len() as f64;
    let ba = b.iter().map(|p| nearest_scan(p, a).1).sum::<f64>() / b.len() as f64;
    1000.0 * (0.5 * ab + 0.5 * ba)
}

pub fn f1_scan(pd: &[Vec3], gt: &[Vec3], eta: f64) -> f64 {
    let p = 100.0 * pd.iter().filter(|x| nearest_scan(x, gt).1 < eta).count() as f64 / pd.len() as f64;
    let r = 100.0 * gt.iter().filter(|x| nearest_scan(x, pd).1 < eta).count() as f64 / gt.len() as f64;
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn nc_scan(pd: &[Vec3], npd: &[Vec3], gt: &[Vec3], ngt: &[Vec3]) -> f64 {
    let one = |a: &[Vec3], na: &[Vec3], b: &[Vec3], nb: &[Vec3]| {
        a.iter()
            .zip(na)
            .map(|(p, n)| n.dot(&nb[nearest_scan(p, b).0]))
            .sum::<f64>()
            / a.len() as f64
    };
    0.5 * one(pd, npd, gt, ngt) + 0.5 * one(gt, ngt, pd, npd)
}

pub fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_transform(rng: &mut impl Rng, spread: f64) -> RigidTransform {
    let r = rotation_from_uniform(rng.random(), rng.random(), rng.random());
    let t = Vec3::new(
        rng.random_range(-spread..spread),
        rng.random_range(-spread..spread),
        rng.random_range(-spread..spread),
    );
    RigidTransform::new(r, t).unwrap()
}

/// A grasp with random pose around `center`.
pub fn random_grasp(rng: &mut impl Rng, center: &Vec3, spread: f64) -> GraspPose {
    let anchor = center
        + Vec3::new(
            rng.random_range(-spread..spread),
            rng.random_range(-spread..spread),
            rng.random_range(-spread..spread),
        );
    GraspPose::new(
        anchor,
        random_unit(rng),
        rng.random_range(0.0..std::f64::consts::PI),
        rng.random_range(0.0..0.10),
        rng.random_range(0.0..0.04),
    )
}

/// Points strictly inside `mesh` on a regular grid of spacing `step`.
pub fn interior_grid(mesh: &TriangleMesh, step: f64) -> Vec<Vec3> {
    let b = mesh.bounds();
    let mut out = Vec::new();
    let n = ((b.max - b.min) / step).map(|x| x.ceil() as usize);
    for i in 0..=n.x {
        for j in 0..=n.y {
            for k in 0..=n.z {
                let p = b.min + Vec3::new(i as f64, j as f64, k as f64) * step;
                if mesh.contains(&p) {
                    out.push(p);
                }
            }
        }
    }
    out
}

/// Closest point on triangle abc: plane projection when it falls inside,
/// otherwise the best of the three edge projections.
pub fn closest_on_triangle_scan(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let n = (b - a).cross(&(c - a));
    if n.norm_squared() > 0.0 {
        let n = n.normalize();
        let q = p - n * (p - a).dot(&n);
        let inside = [(a, b), (b, c), (c, a)]
            .iter()
            .all(|(u, v)| (*v - *u).cross(&(q - *u)).dot(&n) >= 0.0);
        if inside {
            return q;
        }
    }
    let seg = |u: &Vec3, v: &Vec3| {
        let e = v - u;
        let t = if e.norm_squared() > 0.0 {
            ((p - u).dot(&e) / e.norm_squared()).clamp(0.0, 1.0)
        } else {
            0.0
        };
        u + e * t
    };
    [seg(a, b), seg(b, c), seg(c, a)]
        .into_iter()
        .min_by(|x, y| (x - p).norm().total_cmp(&(y - p).norm()))
        .unwrap()
}

/// Distance from `p` to `mesh` by scanning every triangle.
pub fn mesh_distance_scan(mesh: &TriangleMesh, p: &Vec3) -> f64 {
    (0..mesh.triangles().len())
        .map(|t| {
            let [a, b, c] = mesh.corners(t);
            (closest_on_triangle_scan(p, &a, &b, &c) - p).norm()
        })
        .fold(f64::INFINITY, f64::min)
}
