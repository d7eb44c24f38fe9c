use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GraspError;
use crate::geometry::Vec3;

/// Parametric two-finger parallel gripper.
///
/// In the gripper frame (x approach, y closing, z binormal) with opening `w`
/// and depth `d`:
///
/// - fingers: x ∈ [−base_depth, d], |y| ∈ [w/2, w/2 + finger_thickness], |z| ≤ finger_height/2
/// - base:    x ∈ [−base_depth − finger_thickness, −base_depth], |y| ≤ w/2 + finger_thickness
/// - closing volume: x ∈ (−base_depth, d], |y| < w/2, |z| < finger_height/2
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GripperModel {
    pub max_width: f64,
    /// Largest grasp depth the fingers travel past the anchor.
    pub finger_depth: f64,
    pub finger_thickness: f64,
    pub finger_height: f64,
    pub base_depth: f64,
}

impl Default for GripperModel {
    fn default() -> Self {
        Self {
            max_width: 0.10,
            finger_depth: 0.04,
            finger_thickness: 0.01,
            finger_height: 0.02,
            base_depth: 0.02,
        }
    }
}

/// An axis-aligned box in the gripper frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LocalBox {
    pub min: Vec3,
    pub max: Vec3,
}

impl LocalBox {
    #[inline]
    pub fn contains(&self, p: &Vec3) -> bool {
        p.x >= self.min.x
            && p.x <= self.max.x
            && p.y >= self.min.y
            && p.y <= self.max.y
            && p.z >= self.min.z
            && p.z <= self.max.z
    }

    pub fn corners(&self) -> [Vec3; 8] {
        let (a, b) = (self.min, self.max);
        [
            Vec3::new(a.x, a.y, a.z),
            Vec3::new(b.x, a.y, a.z),
            Vec3::new(a.x, b.y, a.z),
            Vec3::new(b.x, b.y, a.z),
            Vec3::new(a.x, a.y, b.z),
            Vec3::new(b.x, a.y, b.z),
            Vec3::new(a.x, b.y, b.z),
            Vec3::new(b.x, b.y, b.z),
        ]
    }
}

impl GripperModel {
    pub fn validate(&self) -> Result<(), GraspError> {
        let dims = [
            self.max_width,
            self.finger_depth,
            self.finger_thickness,
            self.finger_height,
            self.base_depth,
        ];
        if dims.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(GraspError::InvalidGripper(format!("{self:?}")))
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self, GraspError> {
        let text = std::fs::read_to_string(path).map_err(|e| GraspError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let g: Self = serde_json::from_str(&text).map_err(|e| GraspError::Parse(format!("{}: {e}", path.display())))?;
        g.validate()?;
        Ok(g)
    }

    /// Left finger (+y side), right finger (−y side) and base.
    pub fn solid_boxes(&self, width: f64, depth: f64) -> [LocalBox; 3] {
        let hw = width / 2.0;
        let t = self.finger_thickness;
        let hh = self.finger_height / 2.0;
        let x0 = -self.base_depth;
        [
            LocalBox {
                min: Vec3::new(x0, hw, -hh),
                max: Vec3::new(depth, hw + t, hh),
            },
            LocalBox {
                min: Vec3::new(x0, -hw - t, -hh),
                max: Vec3::new(depth, -hw, hh),
            },
            LocalBox {
                min: Vec3::new(x0 - t, -hw - t, -hh),
                max: Vec3::new(x0, hw + t, hh),
            },
        ]
    }

    #[inline]
    pub fn in_solid(&self, p: &Vec3, width: f64, depth: f64) -> bool {
        let hw = width / 2.0;
        let t = self.finger_thickness;
        let hh = self.finger_height / 2.0;
        let x0 = -self.base_depth;
        if p.z < -hh || p.z > hh {
            return false;
        }
        let ay = p.y.abs();
        let finger = p.x >= x0 && p.x <= depth && ay >= hw && ay <= hw + t;
        let base = p.x >= x0 - t && p.x <= x0 && ay <= hw + t;
        finger || base
    }

    #[inline]
    pub fn in_closing_volume(&self, p: &Vec3, width: f64, depth: f64) -> bool {
        p.x > -self.base_depth && p.x <= depth && p.y.abs() < width / 2.0 && p.z.abs() < self.finger_height / 2.0
    }

    /// Radius of a ball around the anchor containing the gripper solid at any
    /// admissible width and depth.
    pub fn reach(&self) -> f64 {
        self.reach_at(self.max_width, self.finger_depth)
    }

    /// Same bound for one opening and depth.
    pub fn reach_at(&self, width: f64, depth: f64) -> f64 {
        let x = (self.base_depth + self.finger_thickness).max(depth.abs());
        let y = width.abs() / 2.0 + self.finger_thickness;
        let z = self.finger_height / 2.0;
        (x * x + y * y + z * z).sqrt()
    }
}
