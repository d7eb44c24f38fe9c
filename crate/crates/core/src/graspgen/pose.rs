use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::geometry::Vec3;

/// Width clip range in meters.
pub const WIDTH_RANGE: (f64, f64) = (0.0, 0.10);
/// Depth clip range in meters.
pub const DEPTH_RANGE: (f64, f64) = (0.0, 0.04);

/// A 6-DOF parallel-jaw grasp.
///
/// The gripper frame has its origin at `anchor`, x along the approach
/// direction `v`, y along the closing axis and z = x × y. The closing axis is
/// the reference axis perpendicular to `v` rotated by `a` about `v`.
/// Fingertips sit at x = `d`; inner finger faces at y = ±`w`/2.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspPose {
    pub anchor: Vec3,
    #[serde(rename = "v")]
    pub view: Vec3,
    #[serde(rename = "a")]
    pub angle: f64,
    #[serde(rename = "w")]
    pub width: f64,
    #[serde(rename = "d")]
    pub depth: f64,
    #[serde(rename = "s")]
    pub graspness: f64,
    #[serde(rename = "q")]
    pub quality: f64,
    #[serde(default)]
    pub object_id: u32,
}

impl GraspPose {
    pub fn new(anchor: Vec3, view: Vec3, angle: f64, width: f64, depth: f64) -> Self {
        Self {
            anchor,
            view: view.normalize(),
            angle: wrap_angle(angle),
            width,
            depth,
            graspness: 0.0,
            quality: 0.0,
            object_id: 0,
        }
    }

    /// Builds the grasp whose gripper frame is `rotation` (columns: approach,
    /// closing, binormal).
    pub fn from_rotation(anchor: Vec3, rotation: &Matrix3<f64>, width: f64, depth: f64) -> Self {
        let x: Vec3 = rotation.column(0).into();
        let y: Vec3 = rotation.column(1).into();
        let (y0, z0) = reference_axes(&x);
        let angle = y.dot(&z0).atan2(y.dot(&y0));
        Self::new(anchor, x, angle, width, depth)
    }

    /// Columns: approach x, closing y, binormal z.
    pub fn rotation(&self) -> Matrix3<f64> {
        frame(&self.view, self.angle)
    }

    pub fn closing_axis(&self) -> Vec3 {
        self.rotation().column(1).into()
    }

    /// Ranking score: graspness times quality.
    pub fn score(&self) -> f64 {
        self.graspness * self.quality
    }

    /// World point to gripper frame.
    #[inline]
    pub fn to_local(&self, rotation: &Matrix3<f64>, p: &Vec3) -> Vec3 {
        rotation.transpose() * (p - self.anchor)
    }

    pub fn clip(mut self) -> Self {
        self.width = self.width.clamp(WIDTH_RANGE.0, WIDTH_RANGE.1);
        self.depth = self.depth.clamp(DEPTH_RANGE.0, DEPTH_RANGE.1);
        self
    }

    /// Rounds every field through `f32`; values then survive f32 storage bit-exactly.
    /// Width and depth round toward zero so they stay inside their ranges.
    pub fn to_f32_precision(&self) -> Self {
        let r = |v: f64| v as f32 as f64;
        let r_down = |v: f64| {
            let f = v as f32;
            if f as f64 > v && f > 0.0 {
                f.next_down() as f64
            } else {
                f as f64
            }
        };
        let rv = |v: &Vec3| v.map(r);
        Self {
            anchor: rv(&self.anchor),
            view: rv(&self.view),
            angle: r(self.angle),
            width: r_down(self.width),
            depth: r_down(self.depth),
            graspness: r(self.graspness),
            quality: r(self.quality),
            object_id: self.object_id,
        }
    }

    /// Fields in packed-record order: anchor xyz, v xyz, a, w, d, s, q, object_id.
    pub fn to_record(&self) -> [f32; PACKED_FIELDS] {
        [
            self.anchor.x as f32,
            self.anchor.y as f32,
            self.anchor.z as f32,
            self.view.x as f32,
            self.view.y as f32,
            self.view.z as f32,
            self.angle as f32,
            self.width as f32,
            self.depth as f32,
            self.graspness as f32,
            self.quality as f32,
            self.object_id as f32,
        ]
    }

    pub fn from_record(r: &[f32; PACKED_FIELDS]) -> Self {
        let f = |i: usize| r[i] as f64;
        Self {
            anchor: Vec3::new(f(0), f(1), f(2)),
            view: Vec3::new(f(3), f(4), f(5)),
            angle: f(6),
            width: f(7),
            depth: f(8),
            graspness: f(9),
            quality: f(10),
            object_id: r[11] as u32,
        }
    }
}

/// Number of `f32` fields in a packed grasp record.
pub const PACKED_FIELDS: usize = 12;

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(std::f64::consts::PI);
    // rem_euclid can round up to exactly π.
    if w >= std::f64::consts::PI {
        0.0
    } else {
        w
    }
}

/// Deterministic pair of unit axes perpendicular to `x`.
pub fn reference_axes(x: &Vec3) -> (Vec3, Vec3) {
    let y0 = Vec3::new(-x.y, x.x, 0.0);
    let y0 = if y0.norm() < 1e-9 {
        Vec3::new(0.0, 1.0, 0.0)
    } else {
        y0.normalize()
    };
    let z0 = x.cross(&y0).normalize();
    (y0, z0)
}

/// Gripper frame for approach `view` and in-plane rotation `angle`.
pub fn frame(view: &Vec3, angle: f64) -> Matrix3<f64> {
    let x = view.normalize();
    let (y0, z0) = reference_axes(&x);
    let (s, c) = angle.sin_cos();
    let y = y0 * c + z0 * s;
    let z = -y0 * s + z0 * c;
    Matrix3::from_columns(&[x, y, z])
}

/// Per-point annotation: graspness for every view plus the best grasp found.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspLabel {
    pub graspness: Vec<f32>,
    pub best: Option<GraspPose>,
}

impl GraspLabel {
    pub fn empty(views: usize) -> Self {
        Self {
            graspness: vec![0.0; views],
            best: None,
        }
    }

    /// Scalar graspness: the best view's fraction.
    pub fn max_graspness(&self) -> f32 {
        self.graspness.iter().copied().fold(0.0, f32::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_is_proper_rotation() {
        for (v, a) in [
            (Vec3::new(0.0, 0.0, -1.0), 0.3),
            (Vec3::new(1.0, 2.0, 3.0), 2.9),
            (Vec3::new(0.0, 0.0, 1.0), 0.0),
        ] {
            let r = frame(&v, a);
            assert!((r.transpose() * r - Matrix3::identity()).amax() < 1e-12);
            assert!((r.determinant() - 1.0).abs() < 1e-12);
            let x: Vec3 = r.column(0).into();
            assert!((x - v.normalize()).norm() < 1e-12);
        }
    }

    #[test]
    fn from_rotation_recovers_angle() {
        let g = GraspPose::new(Vec3::zeros(), Vec3::new(0.3, -0.2, 0.9), 1.1, 0.05, 0.02);
        let back = GraspPose::from_rotation(Vec3::zeros(), &g.rotation(), 0.05, 0.02);
        assert!((back.angle - 1.1).abs() < 1e-12);
        assert!((back.rotation() - g.rotation()).amax() < 1e-12);
    }

    #[test]
    fn angle_wraps_into_half_turn() {
        let g = GraspPose::new(Vec3::zeros(), Vec3::x(), -0.5, 0.0, 0.0);
        assert!((g.angle - (std::f64::consts::PI - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn packed_record_round_trip() {
        let mut g = GraspPose::new(Vec3::new(0.1, 0.2, 0.3), Vec3::z(), 0.5, 0.06, 0.02);
        g.object_id = 3;
        g.quality = 0.75;
        let g = g.to_f32_precision();
        assert_eq!(GraspPose::from_record(&g.to_record()), g);
    }
}
