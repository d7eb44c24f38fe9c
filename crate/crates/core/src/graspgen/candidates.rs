use std::f64::consts::PI;
use std::sync::OnceLock;

use super::{GraspPose, GripperModel};
use crate::geometry::{SurfaceSample, Vec3};

pub const NUM_VIEWS: usize = 300;
pub const NUM_ANGLES: usize = 12;
pub const NUM_DEPTHS: usize = 4;
/// Candidates per view: every angle and depth.
pub const PER_VIEW: usize = NUM_ANGLES * NUM_DEPTHS;
pub const CANDIDATES_PER_SAMPLE: usize = NUM_VIEWS * PER_VIEW;

pub const DEPTHS: [f64; NUM_DEPTHS] = [0.01, 0.02, 0.03, 0.04];

/// `n` directions on a Fibonacci lattice over the unit sphere.
pub fn fibonacci_sphere(n: usize) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * i as f64;
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

/// The fixed 300-direction view template.
pub fn views() -> &'static [Vec3] {
    static VIEWS: OnceLock<Vec<Vec3>> = OnceLock::new();
    VIEWS.get_or_init(|| fibonacci_sphere(NUM_VIEWS))
}

pub fn angle(k: usize) -> f64 {
    PI * k as f64 / NUM_ANGLES as f64
}

/// Position of a (view, angle, depth) triple in the enumeration order.
#[inline]
pub fn candidate_index(view: usize, angle: usize, depth: usize) -> usize {
    (view * NUM_ANGLES + angle) * NUM_DEPTHS + depth
}

/// All 300 × 12 × 4 candidates at a surface sample, view-major, each at full
/// opening. Views whose approach does not oppose the surface normal are still
/// enumerated; labeling treats them as infeasible.
pub fn enumerate_candidates(sample: &SurfaceSample, gripper: &GripperModel) -> Vec<GraspPose> {
    let mut out = Vec::with_capacity(CANDIDATES_PER_SAMPLE);
    for v in views() {
        for a in 0..NUM_ANGLES {
            for d in DEPTHS {
                out.push(GraspPose::new(sample.point, *v, angle(a), gripper.max_width, d));
            }
        }
    }
    out
}

/// Approach `v` comes at the surface from outside.
#[inline]
pub fn view_opposes_normal(view: &Vec3, normal: &Vec3) -> bool {
    view.dot(normal) < 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn count_and_order() {
        let s = SurfaceSample {
            point: Vec3::new(0.1, 0.0, 0.0),
            normal: Vec3::z(),
            triangle_id: 0,
        };
        let c = enumerate_candidates(&s, &GripperModel::default());
        assert_eq!(c.len(), 14_400);
        let g = c[candidate_index(7, 5, 2)];
        assert_eq!(g.view, views()[7].normalize());
        assert!((g.angle - angle(5)).abs() < 1e-15);
        assert_eq!(g.depth, 0.03);
    }

    #[test]
    fn views_are_unit() {
        assert!(views().iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
    }
}
