//! Reconstruction metrics (Chamfer distance, F-score, normal consistency)
//! and friction-swept grasp average precision.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{KdTree, TriangleMesh, Vec3};
use crate::graspgen::{
    force_closure, grasp_quality, CollisionGeometry, GraspError, GraspPose, GripperModel, SurfaceCloud,
};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("point set is empty")]
    EmptyPointSet,
    #[error("normals missing or not aligned with points")]
    MissingNormals,
    #[error("missing ground truth: {0}")]
    MissingGroundTruth(String),
    #[error(transparent)]
    Grasp(#[from] GraspError),
}

/// Friction coefficients of the AP sweep.
pub const FRICTIONS: [f64; 6] = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2];

/// F-score distance threshold, m.
pub const DEFAULT_ETA: f64 = 0.01;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointSet {
    pub points: Vec<Vec3>,
    pub normals: Option<Vec<Vec3>>,
}

impl PointSet {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points, normals: None }
    }

    pub fn with_normals(points: Vec<Vec3>, normals: Vec<Vec3>) -> Self {
        Self {
            points,
            normals: Some(normals),
        }
    }

    pub fn from_pairs(pairs: &[(Vec3, Vec3)]) -> Self {
        Self::with_normals(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Nearest neighbor in `to` for every point of `from`: `(index, distance)`.
fn nearest_all(from: &[Vec3], to: &[Vec3]) -> Vec<(usize, f64)> {
    let tree = KdTree::new(to);
    from.par_iter().map(|p| tree.nearest(p).expect("non-empty")).collect()
}

fn nonempty(a: &PointSet, b: &PointSet) -> Result<(), MetricsError> {
    if a.is_empty() || b.is_empty() {
        Err(MetricsError::EmptyPointSet)
    } else {
        Ok(())
    }
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Symmetric Chamfer distance in millimeters: half the mean nearest distance
/// each way.
pub fn chamfer_distance(pd: &PointSet, gt: &PointSet) -> Result<f64, MetricsError> {
    nonempty(pd, gt)?;
    let a = mean(nearest_all(&pd.points, &gt.points).into_iter().map(|x| x.1));
    let b = mean(nearest_all(&gt.points, &pd.points).into_iter().map(|x| x.1));
    Ok(1000.0 * (0.5 * a + 0.5 * b))
}

/// Precision, recall and F-score in percent. A point counts when its nearest
/// neighbor in the other set is strictly closer than `eta`.
pub fn precision_recall_f1(pd: &PointSet, gt: &PointSet, eta: f64) -> Result<(f64, f64, f64), MetricsError> {
    nonempty(pd, gt)?;
    let frac = |d: Vec<(usize, f64)>| 100.0 * d.iter().filter(|x| x.1 < eta).count() as f64 / d.len() as f64;
    let p = frac(nearest_all(&pd.points, &gt.points));
    let r = frac(nearest_all(&gt.points, &pd.points));
    let f = if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    Ok((p, r, f))
}

pub fn f1_score(pd: &PointSet, gt: &PointSet, eta: f64) -> Result<f64, MetricsError> {
    precision_recall_f1(pd, gt, eta).map(|x| x.2)
}

/// Symmetric normal consistency in [−1, 1]; each normal is compared with the
/// normal of its Euclidean-nearest point in the other set.
pub fn normal_consistency(pd: &PointSet, gt: &PointSet) -> Result<f64, MetricsError> {
    nonempty(pd, gt)?;
    let (Some(np), Some(ng)) = (&pd.normals, &gt.normals) else {
        return Err(MetricsError::MissingNormals);
    };
    if np.len() != pd.len() || ng.len() != gt.len() {
        return Err(MetricsError::MissingNormals);
    }
    let a = mean(
        nearest_all(&pd.points, &gt.points)
            .iter()
            .enumerate()
            .map(|(i, (j, _))| np[i].dot(&ng[*j])),
    );
    let b = mean(
        nearest_all(&gt.points, &pd.points)
            .iter()
            .enumerate()
            .map(|(i, (j, _))| ng[i].dot(&np[*j])),
    );
    Ok(0.5 * a + 0.5 * b)
}

/// Ground truth for grasp evaluation: world-frame meshes, a dense oriented
/// sample of their surfaces and the collision geometry built from it.
#[derive(Clone, Debug)]
pub struct GroundTruthScene {
    meshes: Vec<TriangleMesh>,
    surface: SurfaceCloud,
    collision: CollisionGeometry,
}

impl GroundTruthScene {
    /// `density` is surface area per ground-truth point, m².
    pub fn new(
        meshes: Vec<TriangleMesh>,
        support_plane: Option<f64>,
        density: f64,
        seed: u64,
    ) -> Result<Self, MetricsError> {
        if meshes.is_empty() {
            return Err(MetricsError::MissingGroundTruth("scene has no meshes".into()));
        }
        let clouds = meshes
            .iter()
            .enumerate()
            .map(|(i, m)| SurfaceCloud::sample_mesh(m, density, seed.wrapping_add(1 + i as u64)))
            .collect::<Result<Vec<_>, _>>()?;
        let surface = SurfaceCloud::merged(&clouds);
        let collision = CollisionGeometry::from_points(surface.points().to_vec()).with_support_plane(support_plane);
        Ok(Self {
            meshes,
            surface,
            collision,
        })
    }

    pub fn meshes(&self) -> &[TriangleMesh] {
        &self.meshes
    }

    pub fn surface(&self) -> &SurfaceCloud {
        &self.surface
    }

    pub fn collision(&self) -> &CollisionGeometry {
        &self.collision
    }

    /// Collision against surface points and the support plane, plus a check
    /// that no gripper box center lies inside a closed mesh.
    pub fn collides(&self, grasp: &GraspPose, gripper: &GripperModel) -> bool {
        if self.collision.collides(grasp, gripper) {
            return true;
        }
        let rot = grasp.rotation();
        gripper.solid_boxes(grasp.width, grasp.depth).iter().any(|b| {
            let c = rot * ((b.min + b.max) / 2.0) + grasp.anchor;
            self.meshes
                .iter()
                .any(|m| m.is_watertight() && m.bounds().contains(&c) && m.contains(&c))
        })
    }

    /// Quality of a grasp on the ground truth, or `None` when it collides or
    /// has no valid contact pair.
    pub fn grasp_quality(&self, grasp: &GraspPose, gripper: &GripperModel) -> Option<f64> {
        if self.collides(grasp, gripper) {
            return None;
        }
        let r = gripper.reach_at(grasp.width, grasp.depth);
        let ids = self.surface.within_radius(&grasp.anchor, r);
        let rot = grasp.rotation();
        let c = crate::graspgen::find_contacts_among(
            grasp,
            &rot,
            self.surface.points(),
            self.surface.normals(),
            &ids,
            gripper,
        )?;
        grasp_quality(&c).ok()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ApConfig {
    pub top_k: usize,
}

impl Default for ApConfig {
    fn default() -> Self {
        Self { top_k: 50 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneAp {
    pub ap: f64,
    pub ap_by_mu: Vec<f64>,
    /// Row k−1 holds precision@k (percent) for each friction coefficient.
    pub precision_at_k: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct APReport {
    pub ap: f64,
    /// Keyed by friction coefficient formatted with one decimal.
    pub ap_by_mu: BTreeMap<String, f64>,
    pub scenes: Vec<SceneAp>,
}

/// AP from per-rank validity. `quality[i]` is the ground-truth quality of the
/// rank-`i` grasp (`None` when invalid). precision@k divides by k, so missing
/// ranks count as failures.
pub fn scene_ap(quality: &[Option<f64>], top_k: usize) -> SceneAp {
    let mut table = Vec::with_capacity(top_k);
    let mut hits = [0usize; FRICTIONS.len()];
    for k in 1..=top_k {
        if let Some(Some(q)) = quality.get(k - 1) {
            for (h, mu) in hits.iter_mut().zip(FRICTIONS) {
                *h += force_closure(*q, mu) as usize;
            }
        }
        table.push(hits.iter().map(|&h| 100.0 * h as f64 / k as f64).collect::<Vec<_>>());
    }
    let ap_by_mu: Vec<f64> = (0..FRICTIONS.len())
        .map(|m| table.iter().map(|row| row[m]).sum::<f64>() / top_k as f64)
        .collect();
    SceneAp {
        ap: ap_by_mu.iter().sum::<f64>() / FRICTIONS.len() as f64,
        ap_by_mu,
        precision_at_k: table,
    }
}

/// Sorts by descending score, stable.
pub fn rank_grasps(grasps: &[GraspPose]) -> Vec<GraspPose> {
    let mut g = grasps.to_vec();
    g.sort_by(|a, b| b.score().total_cmp(&a.score()));
    g
}

/// Friction-swept AP over scenes. Each scene's grasps are ranked by score and
/// the top `top_k` are checked on the ground truth: a grasp is a true
/// positive at μ when it is collision-free and its contact quality passes the
/// friction-cone test. Scene AP values are averaged.
pub fn grasp_ap(
    grasps_per_scene: &[Vec<GraspPose>],
    scenes: &[GroundTruthScene],
    gripper: &GripperModel,
    cfg: &ApConfig,
) -> Result<APReport, MetricsError> {
    if grasps_per_scene.len() != scenes.len() {
        return Err(MetricsError::MissingGroundTruth(format!(
            "{} grasp sets for {} scenes",
            grasps_per_scene.len(),
            scenes.len()
        )));
    }
    if cfg.top_k == 0 {
        return Err(MetricsError::EmptyPointSet);
    }
    let per_scene: Vec<SceneAp> = grasps_per_scene
        .par_iter()
        .zip(scenes.par_iter())
        .map(|(gs, sc)| {
            let ranked = rank_grasps(gs);
            let q: Vec<Option<f64>> = ranked
                .iter()
                .take(cfg.top_k)
                .map(|g| sc.grasp_quality(g, gripper))
                .collect();
            scene_ap(&q, cfg.top_k)
        })
        .collect();
    Ok(summarize(per_scene))
}

pub fn summarize(scenes: Vec<SceneAp>) -> APReport {
    let n = scenes.len().max(1) as f64;
    let mut ap_by_mu = BTreeMap::new();
    let mut total = 0.0;
    for (m, mu) in FRICTIONS.iter().enumerate() {
        let v = scenes.iter().map(|s| s.ap_by_mu[m]).sum::<f64>() / n;
        total += v;
        ap_by_mu.insert(format!("{mu:.1}"), v);
    }
    APReport {
        ap: total / FRICTIONS.len() as f64,
        ap_by_mu,
        scenes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair_chamfer() {
        let a = PointSet::new(vec![Vec3::zeros()]);
        let b = PointSet::new(vec![Vec3::new(0.0, 0.0, 0.001)]);
        assert!((chamfer_distance(&a, &b).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn half_within_threshold() {
        let gt = PointSet::new((0..10).map(|i| Vec3::new(i as f64, 0.0, 0.0)).collect());
        let mut pd = gt.points.clone();
        pd.extend((0..10).map(|i| Vec3::new(i as f64, 0.5, 0.0)));
        let (p, r, f) = precision_recall_f1(&PointSet::new(pd), &gt, 0.01).unwrap();
        assert_eq!((p, r), (50.0, 100.0));
        assert!((f - 200.0 / 3.0).abs() < 1e-9);
    }

    #[test]
    fn empty_and_missing_normals() {
        let a = PointSet::new(vec![Vec3::zeros()]);
        assert!(matches!(
            chamfer_distance(&a, &PointSet::default()),
            Err(MetricsError::EmptyPointSet)
        ));
        assert!(matches!(normal_consistency(&a, &a), Err(MetricsError::MissingNormals)));
    }

    #[test]
    fn all_valid_and_all_invalid() {
        let ok = scene_ap(&vec![Some(1.0); 50], 50);
        assert!((ok.ap - 100.0).abs() < 1e-12);
        let bad = scene_ap(&vec![None; 50], 50);
        assert_eq!(bad.ap, 0.0);
    }

    #[test]
    fn ap_increases_with_friction() {
        let q: Vec<Option<f64>> = (0..50).map(|i| Some(0.5 + 0.01 * i as f64)).collect();
        let s = scene_ap(&q, 50);
        assert!(s.ap_by_mu.windows(2).all(|w| w[0] <= w[1]));
    }
}
