use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::candidates::{angle, view_opposes_normal, views, DEPTHS, NUM_ANGLES, NUM_VIEWS, PER_VIEW};
use super::contacts::{grasp_quality, select_contacts, ContactPair};
use super::{CollisionGeometry, GraspError, GraspLabel, GraspPose, GripperModel};
use crate::geometry::{sample_surface, sample_surface_n, KdTree, PointGrid, SurfaceSample, TriangleMesh, Vec3};
use crate::octree::{Octree, OctreeError};

/// Knobs for dense label generation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelConfig {
    /// Surface area per labeled sample, m².
    pub rho: f64,
    /// Minimum quality for a candidate to count toward graspness.
    pub q_min: f64,
    /// Finger clearance added on each side when the labeled width is tightened.
    pub clearance: f64,
    /// Surface area per contact/collision point, m².
    pub contact_density: f64,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self {
            rho: 0.005,
            q_min: 0.1,
            clearance: 0.01,
            contact_density: 4e-6,
        }
    }
}

/// Dense oriented surface points used for contact search.
#[derive(Clone, Debug)]
pub struct SurfaceCloud {
    grid: PointGrid,
    normals: Vec<Vec3>,
}

impl SurfaceCloud {
    pub fn new(points: Vec<Vec3>, normals: Vec<Vec3>) -> Self {
        assert_eq!(points.len(), normals.len());
        Self {
            grid: PointGrid::new(points, 0.01),
            normals,
        }
    }

    pub fn from_pairs(pairs: &[(Vec3, Vec3)]) -> Self {
        Self::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
    }

    /// Uniform area-weighted sampling with `density` m² per point.
    pub fn sample_mesh(mesh: &TriangleMesh, density: f64, seed: u64) -> Result<Self, GraspError> {
        let n = (mesh.surface_area() / density).ceil() as usize;
        let s = sample_surface_n(mesh, n.max(1), seed)?;
        Ok(Self::new(
            s.iter().map(|x| x.point).collect(),
            s.iter().map(|x| x.normal).collect(),
        ))
    }

    pub fn points(&self) -> &[Vec3] {
        self.grid.points()
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn pairs(&self) -> Vec<(Vec3, Vec3)> {
        self.points()
            .iter()
            .copied()
            .zip(self.normals.iter().copied())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.normals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.normals.is_empty()
    }

    pub(crate) fn within_radius(&self, c: &Vec3, r: f64) -> Vec<usize> {
        self.grid.within_radius(c, r)
    }

    pub fn merged<'a, I: IntoIterator<Item = &'a SurfaceCloud>>(clouds: I) -> Self {
        let mut pts = Vec::new();
        let mut ns = Vec::new();
        for c in clouds {
            pts.extend_from_slice(c.points());
            ns.extend_from_slice(&c.normals);
        }
        Self::new(pts, ns)
    }
}

/// Labels one surface sample: every (view, angle, depth) candidate at full
/// opening is collision-checked; collision-free candidates with contacts get
/// a quality. A view's graspness is the fraction of its 48 candidates that are
/// collision-free with quality ≥ `q_min`; views not opposing the sample
/// normal score 0. The best grasp is the highest-quality valid candidate,
/// its width tightened to the contacts plus `clearance` per side.
pub fn label_sample(
    sample: &SurfaceSample,
    surface: &SurfaceCloud,
    collision: &CollisionGeometry,
    gripper: &GripperModel,
    cfg: &LabelConfig,
) -> GraspLabel {
    let anchor = sample.point;
    let reach = gripper.reach();
    let contact_ids = surface.within_radius(&anchor, reach);
    let collision_ids = collision.grid().within_radius(&anchor, reach);
    let width = gripper.max_width;
    let mut label = GraspLabel::empty(NUM_VIEWS);
    let mut best: Option<(f64, GraspPose)> = None;
    let mut local_contacts: Vec<(usize, Vec3)> = Vec::with_capacity(contact_ids.len());
    let mut local_collision: Vec<Vec3> = Vec::with_capacity(collision_ids.len());
    for (vi, view) in views().iter().enumerate() {
        if !view_opposes_normal(view, &sample.normal) {
            continue;
        }
        let mut valid = 0usize;
        let mut view_best: Option<(f64, GraspPose)> = None;
        for ai in 0..NUM_ANGLES {
            let a = angle(ai);
            let rot = GraspPose::new(anchor, *view, a, width, 0.0).rotation();
            let rt = rot.transpose();
            local_contacts.clear();
            local_contacts.extend(contact_ids.iter().map(|&i| (i, rt * (surface.points()[i] - anchor))));
            local_collision.clear();
            local_collision.extend(collision_ids.iter().map(|&i| rt * (collision.points()[i] - anchor)));
            for d in DEPTHS {
                let grasp = GraspPose::new(anchor, *view, a, width, d);
                if collides_local(&grasp, &rot, &local_collision, collision.support_plane(), gripper) {
                    continue;
                }
                let inside = local_contacts
                    .iter()
                    .copied()
                    .filter(|(_, q)| gripper.in_closing_volume(q, width, d));
                let Some((l, r)) = select_contacts(inside, width, d) else {
                    continue;
                };
                let pair = ContactPair {
                    left: surface.points()[l],
                    right: surface.points()[r],
                    left_normal: surface.normals()[l],
                    right_normal: surface.normals()[r],
                };
                let Ok(q) = grasp_quality(&pair) else {
                    continue;
                };
                if q < cfg.q_min {
                    continue;
                }
                valid += 1;
                if view_best.is_none_or(|(bq, _)| q > bq) {
                    let yl = rt * (pair.left - anchor);
                    let yr = rt * (pair.right - anchor);
                    let half = yl.y.max(-yr.y) + cfg.clearance;
                    let mut g = grasp;
                    g.width = (2.0 * half).min(gripper.max_width);
                    g.quality = q;
                    view_best = Some((q, g));
                }
            }
        }
        let s = valid as f64 / PER_VIEW as f64;
        label.graspness[vi] = s as f32;
        if let Some((q, mut g)) = view_best {
            g.graspness = s;
            if best.is_none_or(|(bq, _)| q > bq) {
                best = Some((q, g));
            }
        }
    }
    label.best = best.map(|(_, g)| g);
    label
}

fn collides_local(
    grasp: &GraspPose,
    rot: &nalgebra::Matrix3<f64>,
    local: &[Vec3],
    plane: Option<f64>,
    gripper: &GripperModel,
) -> bool {
    if let Some(z) = plane {
        let below = gripper
            .solid_boxes(grasp.width, grasp.depth)
            .iter()
            .flat_map(|b| b.corners())
            .any(|c| (rot * c + grasp.anchor).z < z);
        if below {
            return true;
        }
    }
    local.iter().any(|q| gripper.in_solid(q, grasp.width, grasp.depth))
}

/// Labels many samples in parallel; output order follows `samples`.
pub fn label_samples(
    samples: &[SurfaceSample],
    surface: &SurfaceCloud,
    collision: &CollisionGeometry,
    gripper: &GripperModel,
    cfg: &LabelConfig,
) -> Vec<GraspLabel> {
    samples
        .par_iter()
        .map(|s| label_sample(s, surface, collision, gripper, cfg))
        .collect()
}

/// Full single-object pipeline: sample the mesh at `rho`, enumerate,
/// collision-filter against the object itself, find contacts and score.
pub fn generate_labels(
    mesh: &TriangleMesh,
    gripper: &GripperModel,
    rho: f64,
    seed: u64,
) -> Result<Vec<(SurfaceSample, GraspLabel)>, GraspError> {
    let cfg = LabelConfig {
        rho,
        ..LabelConfig::default()
    };
    generate_labels_with(mesh, gripper, &cfg, seed)
}

pub fn generate_labels_with(
    mesh: &TriangleMesh,
    gripper: &GripperModel,
    cfg: &LabelConfig,
    seed: u64,
) -> Result<Vec<(SurfaceSample, GraspLabel)>, GraspError> {
    gripper.validate()?;
    let samples = sample_surface(mesh, cfg.rho, seed)?;
    let surface = SurfaceCloud::sample_mesh(mesh, cfg.contact_density, seed.wrapping_add(1))?;
    let collision = CollisionGeometry::from_points(surface.points().to_vec());
    let labels = label_samples(&samples, &surface, &collision, gripper, cfg);
    Ok(samples.into_iter().zip(labels).collect())
}

/// Radius within which a labeled sample is assigned to an octree leaf, m.
pub const LABEL_RADIUS: f64 = 0.005;

/// Gives every leaf the label of the nearest labeled sample within `radius`
/// of the leaf's surface point (`p − φ·n`, or the center when the leaf has no
/// surface attributes). Leaves with none get `None`, i.e. graspness 0.
pub fn attach_labels(
    tree: &mut Octree,
    labeled: &[(SurfaceSample, GraspLabel)],
    radius: f64,
) -> Result<(), OctreeError> {
    let anchors: Vec<Vec3> = match tree.extract_surface() {
        Ok(s) => s.into_iter().map(|x| x.0).collect(),
        Err(_) => tree.leaf_centers(),
    };
    let pts: Vec<Vec3> = labeled.iter().map(|x| x.0.point).collect();
    let kd = KdTree::new(&pts);
    let labels = anchors
        .iter()
        .map(|a| match kd.nearest(a) {
            Some((i, d)) if d <= radius => Some(labeled[i].1.clone()),
            _ => None,
        })
        .collect();
    tree.set_grasp_labels(labels)
}
