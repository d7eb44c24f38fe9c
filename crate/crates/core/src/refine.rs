//! Contact-based width/depth refinement, collision rejection against a
//! reconstruction, and greedy grasp NMS.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::graspgen::{
    find_contacts_among, CollisionGeometry, ContactPair, GraspPose, GripperModel, SurfaceCloud, DEPTH_RANGE,
    WIDTH_RANGE,
};
use crate::octree::{Octree, OctreeError};

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("invalid refinement config: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RefinementConfig {
    /// Smallest allowed finger-to-contact clearance, m.
    pub gamma_min: f64,
    /// Largest allowed finger-to-contact clearance, m.
    pub gamma_max: f64,
    pub nms_translation: f64,
    /// Radians.
    pub nms_rotation: f64,
    pub top_k: usize,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            gamma_min: 0.005,
            gamma_max: 0.02,
            nms_translation: 0.03,
            nms_rotation: 30f64.to_radians(),
            top_k: 50,
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<(), RefineError> {
        let ok = self.gamma_min >= 0.0
            && self.gamma_min < self.gamma_max
            && self.gamma_max.is_finite()
            && self.nms_translation >= 0.0
            && self.nms_rotation >= 0.0
            && self.top_k >= 1;
        if ok {
            Ok(())
        } else {
            Err(RefineError::InvalidConfig(format!("{self:?}")))
        }
    }
}

/// A reconstructed scene as seen by the refiner: oriented surface points for
/// contacts, occupied points for collisions.
#[derive(Clone, Debug)]
pub struct Reconstruction {
    surface: SurfaceCloud,
    occupied: CollisionGeometry,
}

impl Reconstruction {
    pub fn new(surface: SurfaceCloud, occupied: CollisionGeometry) -> Self {
        Self { surface, occupied }
    }

    /// Surface from `p − φ·n` per leaf, occupancy from leaf centers.
    pub fn from_octree(tree: &Octree) -> Result<Self, OctreeError> {
        Self::from_octrees(std::iter::once(tree))
    }

    pub fn from_octrees<'a, I>(trees: I) -> Result<Self, OctreeError>
    where
        I: IntoIterator<Item = &'a Octree> + Clone,
    {
        let mut pairs = Vec::new();
        for t in trees.clone() {
            pairs.extend(t.extract_surface()?);
        }
        Ok(Self {
            surface: SurfaceCloud::from_pairs(&pairs),
            occupied: CollisionGeometry::from_octrees(trees),
        })
    }

    pub fn with_support_plane(mut self, z: Option<f64>) -> Self {
        self.occupied = self.occupied.with_support_plane(z);
        self
    }

    pub fn surface(&self) -> &SurfaceCloud {
        &self.surface
    }

    pub fn occupied(&self) -> &CollisionGeometry {
        &self.occupied
    }

    /// Same result as `find_contacts` over the whole surface.
    pub fn contacts(&self, grasp: &GraspPose, gripper: &GripperModel) -> Option<ContactPair> {
        let r = gripper.reach_at(grasp.width, grasp.depth);
        let ids = self.surface.within_radius(&grasp.anchor, r);
        let rot = grasp.rotation();
        find_contacts_among(
            grasp,
            &rot,
            self.surface.points(),
            self.surface.normals(),
            &ids,
            gripper,
        )
    }

    pub fn collides(&self, grasp: &GraspPose, gripper: &GripperModel) -> bool {
        self.occupied.collides(grasp, gripper)
    }
}

/// Clearance of each contact to its finger's inner face along the closing
/// axis, and each contact's approach coordinate: `(D_L, D_R, Z_L, Z_R)`.
pub fn contact_offsets(grasp: &GraspPose, contacts: &ContactPair) -> (f64, f64, f64, f64) {
    let rot = grasp.rotation();
    let l = grasp.to_local(&rot, &contacts.left);
    let r = grasp.to_local(&rot, &contacts.right);
    let hw = grasp.width / 2.0;
    (hw - l.y, r.y + hw, l.x, r.x)
}

/// Applies the contact constraints to a grasp whose contacts are known.
///
/// `Δw = min(D_L, D_R)`, `w ← w + 2(clamp(Δw, γ_min, γ_max) − Δw)`,
/// `d ← clamp(max(Z_L, Z_R), 0, 0.04)`, then `w` is clipped to `[0, 0.10]`.
pub fn apply_contact_constraints(grasp: &GraspPose, contacts: &ContactPair, cfg: &RefinementConfig) -> GraspPose {
    let (dl, dr, zl, zr) = contact_offsets(grasp, contacts);
    let dw = dl.min(dr);
    let mut g = *grasp;
    g.width = grasp.width + 2.0 * (dw.clamp(cfg.gamma_min, cfg.gamma_max) - dw);
    g.depth = zl.max(zr).clamp(DEPTH_RANGE.0, DEPTH_RANGE.1);
    g.width = g.width.clamp(WIDTH_RANGE.0, WIDTH_RANGE.1);
    g
}

/// Refines width and depth from the contacts on `recon`; `None` when either
/// finger has nothing to touch.
pub fn refine_grasp(
    grasp: &GraspPose,
    recon: &Reconstruction,
    gripper: &GripperModel,
    cfg: &RefinementConfig,
) -> Option<GraspPose> {
    let c = recon.contacts(grasp, gripper)?;
    Some(apply_contact_constraints(grasp, &c, cfg))
}

/// Drops grasps that collide with `recon`; order is kept.
pub fn filter_collisions(grasps: &[GraspPose], recon: &Reconstruction, gripper: &GripperModel) -> Vec<GraspPose> {
    let keep: Vec<bool> = grasps.par_iter().map(|g| !recon.collides(g, gripper)).collect();
    grasps.iter().zip(keep).filter(|(_, k)| *k).map(|(g, _)| *g).collect()
}

/// Geodesic angle between two gripper frames, radians.
pub fn rotation_distance(a: &GraspPose, b: &GraspPose) -> f64 {
    let r = a.rotation().transpose() * b.rotation();
    ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

/// Greedy NMS on `score = s·q`: walks grasps by descending score (ties by
/// input order) and keeps one unless an already-kept grasp is within both
/// `nms_translation` and `nms_rotation`. Stops at `top_k`.
pub fn grasp_nms(grasps: &[GraspPose], cfg: &RefinementConfig) -> Vec<GraspPose> {
    let mut order: Vec<usize> = (0..grasps.len()).collect();
    order.par_sort_by(|&i, &j| grasps[j].score().total_cmp(&grasps[i].score()).then(i.cmp(&j)));
    let mut kept: Vec<GraspPose> = Vec::new();
    for i in order {
        if kept.len() >= cfg.top_k {
            break;
        }
        let g = &grasps[i];
        let close = kept.iter().any(|k| {
            (k.anchor - g.anchor).norm() <= cfg.nms_translation && rotation_distance(k, g) <= cfg.nms_rotation
        });
        if !close {
            kept.push(*g);
        }
    }
    kept
}

/// Refine every grasp, drop the unrefinable ones, reject collisions at the
/// refined pose, then NMS.
pub fn refine_pipeline(
    grasps: &[GraspPose],
    recon: &Reconstruction,
    gripper: &GripperModel,
    cfg: &RefinementConfig,
) -> Vec<GraspPose> {
    let refined: Vec<GraspPose> = grasps
        .par_iter()
        .map(|g| refine_grasp(g, recon, gripper, cfg))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    grasp_nms(&filter_collisions(&refined, recon, gripper), cfg)
}

/// Surface points of a flat list as a reconstruction with no separate occupancy.
pub fn reconstruction_from_points(surface: &[(Vec3, Vec3)]) -> Reconstruction {
    let cloud = SurfaceCloud::from_pairs(surface);
    let occ = CollisionGeometry::from_points(cloud.points().to_vec());
    Reconstruction::new(cloud, occ)
}
