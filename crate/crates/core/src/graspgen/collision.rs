use nalgebra::Matrix3;

use super::{GraspPose, GripperModel};
use crate::geometry::{PointGrid, Vec3};
use crate::octree::Octree;

/// Grid cell size for collision point lookups.
const GRID_CELL: f64 = 0.01;

/// Occupied geometry for model-free collision checks: a point set plus an
/// optional support half-space `z < plane`.
#[derive(Clone, Debug)]
pub struct CollisionGeometry {
    grid: PointGrid,
    plane: Option<f64>,
}

impl CollisionGeometry {
    pub fn from_points(points: Vec<Vec3>) -> Self {
        Self {
            grid: PointGrid::new(points, GRID_CELL),
            plane: None,
        }
    }

    /// Leaf centers of every octree.
    pub fn from_octrees<'a, I: IntoIterator<Item = &'a Octree>>(trees: I) -> Self {
        Self::from_points(trees.into_iter().flat_map(|t| t.leaf_centers()).collect())
    }

    pub fn with_support_plane(mut self, z: Option<f64>) -> Self {
        self.plane = z;
        self
    }

    pub fn points(&self) -> &[Vec3] {
        self.grid.points()
    }

    pub fn grid(&self) -> &PointGrid {
        &self.grid
    }

    pub fn support_plane(&self) -> Option<f64> {
        self.plane
    }

    /// True iff an occupied point lies in the finger or base boxes, or the
    /// gripper solid dips below the support plane.
    pub fn collides(&self, grasp: &GraspPose, gripper: &GripperModel) -> bool {
        let rot = grasp.rotation();
        self.collides_with_rotation(grasp, &rot, gripper)
    }

    pub(crate) fn collides_with_rotation(&self, grasp: &GraspPose, rot: &Matrix3<f64>, gripper: &GripperModel) -> bool {
        let boxes = gripper.solid_boxes(grasp.width, grasp.depth);
        if let Some(z) = self.plane {
            let below = boxes
                .iter()
                .flat_map(|b| b.corners())
                .any(|c| (rot * c + grasp.anchor).z < z);
            if below {
                return true;
            }
        }
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for c in boxes.iter().flat_map(|b| b.corners()) {
            let w = rot * c + grasp.anchor;
            lo = lo.inf(&w);
            hi = hi.sup(&w);
        }
        let mut hit = false;
        self.grid.for_each_in_box(&lo, &hi, |i| {
            if !hit {
                let q = grasp.to_local(rot, &self.grid.points()[i]);
                hit = gripper.in_solid(&q, grasp.width, grasp.depth);
            }
        });
        hit
    }
}

/// Point-set collision test without an index.
pub fn check_collision(grasp: &GraspPose, points: &[Vec3], gripper: &GripperModel) -> bool {
    let rot = grasp.rotation();
    points
        .iter()
        .any(|p| gripper.in_solid(&grasp.to_local(&rot, p), grasp.width, grasp.depth))
}

/// Collision against an octree's occupied leaf centers.
pub fn check_collision_octree(grasp: &GraspPose, tree: &Octree, gripper: &GripperModel) -> bool {
    let rot = grasp.rotation();
    tree.codes()
        .iter()
        .any(|&c| gripper.in_solid(&grasp.to_local(&rot, &tree.center_of_code(c)), grasp.width, grasp.depth))
}
