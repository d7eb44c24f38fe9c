use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use super::{GraspError, GraspPose, GripperModel};
use crate::geometry::Vec3;

/// Points whose finger gap is within this of the smallest gap are treated as
/// tied; the one nearest the fingertip center becomes the contact.
pub const CONTACT_TIE_TOLERANCE: f64 = 1e-4;

/// Contact-pair separation below which quality is undefined.
pub const MIN_CONTACT_SEPARATION: f64 = 1e-6;

/// Contacts under the left (+y) and right (−y) fingers with outward normals.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactPair {
    pub left: Vec3,
    pub right: Vec3,
    pub left_normal: Vec3,
    pub right_normal: Vec3,
}

impl ContactPair {
    pub fn swapped(&self) -> Self {
        Self {
            left: self.right,
            right: self.left,
            left_normal: self.right_normal,
            right_normal: self.left_normal,
        }
    }
}

/// Running contact choice for one finger.
#[derive(Clone, Copy, Debug)]
struct Pick {
    gap: f64,
    /// Squared distance to the fingertip center (x = d, z = 0).
    off: f64,
    index: usize,
}

/// Chooses contacts from points already in the gripper frame. `local` yields
/// `(index, local point)` in ascending index order; only points inside the
/// closing volume should be passed. Returns `(left, right)` indices.
pub(crate) fn select_contacts<I>(local: I, width: f64, depth: f64) -> Option<(usize, usize)>
where
    I: IntoIterator<Item = (usize, Vec3)> + Clone,
{
    let hw = width / 2.0;
    let mut min_left = f64::INFINITY;
    let mut min_right = f64::INFINITY;
    for (_, p) in local.clone() {
        min_left = min_left.min(hw - p.y);
        min_right = min_right.min(p.y + hw);
    }
    if !min_left.is_finite() {
        return None;
    }
    let mut left: Option<Pick> = None;
    let mut right: Option<Pick> = None;
    let better = |cur: &Option<Pick>, off: f64, index: usize| match cur {
        None => true,
        Some(c) => off < c.off || (off == c.off && index < c.index),
    };
    for (i, p) in local {
        let off = (p.x - depth).powi(2) + p.z * p.z;
        let gl = hw - p.y;
        if gl <= min_left + CONTACT_TIE_TOLERANCE && better(&left, off, i) {
            left = Some(Pick { gap: gl, off, index: i });
        }
        let gr = p.y + hw;
        if gr <= min_right + CONTACT_TIE_TOLERANCE && better(&right, off, i) {
            right = Some(Pick { gap: gr, off, index: i });
        }
    }
    let (l, r) = (left?, right?);
    debug_assert!(l.gap.is_finite() && r.gap.is_finite());
    Some((l.index, r.index))
}

/// Contacts of `grasp` on a surface given as `(point, outward normal)`.
///
/// Among surface points inside the closing volume, the left contact
/// minimizes the gap to the left finger's inner face (`w/2 − y`) and the right
/// contact the gap to the right one (`y + w/2`). Gaps within
/// [`CONTACT_TIE_TOLERANCE`] of the minimum tie; ties go to the point nearest
/// the fingertip center (x = d, z = 0), then the lower index.
pub fn find_contacts(grasp: &GraspPose, surface: &[(Vec3, Vec3)], gripper: &GripperModel) -> Option<ContactPair> {
    let rot = grasp.rotation();
    let local: Vec<(usize, Vec3)> = surface
        .iter()
        .enumerate()
        .map(|(i, (p, _))| (i, grasp.to_local(&rot, p)))
        .filter(|(_, q)| gripper.in_closing_volume(q, grasp.width, grasp.depth))
        .collect();
    let (l, r) = select_contacts(local.iter().copied(), grasp.width, grasp.depth)?;
    Some(ContactPair {
        left: surface[l].0,
        right: surface[r].0,
        left_normal: surface[l].1,
        right_normal: surface[r].1,
    })
}

/// Same as [`find_contacts`] over a subset of candidate indices (ascending).
pub(crate) fn find_contacts_among(
    grasp: &GraspPose,
    rot: &Matrix3<f64>,
    points: &[Vec3],
    normals: &[Vec3],
    candidates: &[usize],
    gripper: &GripperModel,
) -> Option<ContactPair> {
    let local: Vec<(usize, Vec3)> = candidates
        .iter()
        .map(|&i| (i, grasp.to_local(rot, &points[i])))
        .filter(|(_, q)| gripper.in_closing_volume(q, grasp.width, grasp.depth))
        .collect();
    let (l, r) = select_contacts(local.iter().copied(), grasp.width, grasp.depth)?;
    Some(ContactPair {
        left: points[l],
        right: points[r],
        left_normal: normals[l],
        right_normal: normals[r],
    })
}

/// Antipodal quality `min(n_L·u, −n_R·u)` with `u` the unit vector from the
/// right contact to the left one. 1 for a perfect antipodal pair.
pub fn grasp_quality(contacts: &ContactPair) -> Result<f64, GraspError> {
    let diff = contacts.left - contacts.right;
    let len = diff.norm();
    if len < MIN_CONTACT_SEPARATION {
        return Err(GraspError::DegenerateContacts(len));
    }
    let u = diff / len;
    Ok(contacts.left_normal.dot(&u).min(-contacts.right_normal.dot(&u)))
}

/// Friction-cone test at coefficient `mu`: the quality must reach the cosine
/// of the cone half-angle `atan(mu)`.
pub fn force_closure(quality: f64, mu: f64) -> bool {
    quality >= mu.atan().cos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pair(l: Vec3, nl: Vec3, r: Vec3, nr: Vec3) -> ContactPair {
        ContactPair {
            left: l,
            right: r,
            left_normal: nl,
            right_normal: nr,
        }
    }

    #[test]
    fn antipodal_box_scores_one() {
        let c = pair(
            Vec3::new(0.0, 0.02, 0.0),
            Vec3::y(),
            Vec3::new(0.0, -0.02, 0.0),
            -Vec3::y(),
        );
        assert_abs_diff_eq!(grasp_quality(&c).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn orthogonal_normals_score_zero() {
        let c = pair(
            Vec3::new(0.0, 0.02, 0.0),
            Vec3::z(),
            Vec3::new(0.0, -0.02, 0.0),
            Vec3::x(),
        );
        assert_abs_diff_eq!(grasp_quality(&c).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn coincident_contacts_are_degenerate() {
        let c = pair(Vec3::zeros(), Vec3::y(), Vec3::new(0.0, 0.0, 1e-7), -Vec3::y());
        assert!(matches!(grasp_quality(&c), Err(GraspError::DegenerateContacts(_))));
    }

    #[test]
    fn box_contacts_one_centimeter_from_fingers() {
        // 4 cm box face points at y = ±0.02, gripper opened to 6 cm.
        let mut surface = Vec::new();
        for i in -4..=4 {
            for k in -4..=4 {
                let (x, z) = (0.003 * i as f64 + 0.01, 0.002 * k as f64);
                surface.push((Vec3::new(x, 0.02, z), Vec3::y()));
                surface.push((Vec3::new(x, -0.02, z), -Vec3::y()));
            }
        }
        let g = GraspPose::new(Vec3::zeros(), Vec3::x(), 0.0, 0.06, 0.03);
        // With v = x the closing axis is +y at angle 0.
        assert!((g.closing_axis() - Vec3::y()).norm() < 1e-12);
        let c = find_contacts(&g, &surface, &GripperModel::default()).unwrap();
        assert_abs_diff_eq!(0.03 - c.left.y, 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(c.right.y + 0.03, 0.01, epsilon = 1e-12);
        assert_eq!(c.left_normal, Vec3::y());
        assert_abs_diff_eq!(grasp_quality(&c).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_closing_volume() {
        let g = GraspPose::new(Vec3::zeros(), Vec3::x(), 0.0, 0.06, 0.03);
        let far = [(Vec3::new(1.0, 0.0, 0.0), Vec3::x())];
        assert!(find_contacts(&g, &far, &GripperModel::default()).is_none());
        assert!(find_contacts(&g, &[], &GripperModel::default()).is_none());
    }

    #[test]
    fn friction_cone_thresholds() {
        assert!(force_closure(1.0, 0.2));
        assert!(!force_closure(0.9, 0.2));
        assert!(force_closure(0.9, 0.6));
    }
}
