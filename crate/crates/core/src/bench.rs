//! Deterministic synthetic tabletop benchmark: random primitive scenes,
//! dense ground-truth labels, a noisy grasp predictor, and AP with and
//! without refinement.

use std::f64::consts::PI;
use std::time::Instant;

use nalgebra::{Rotation3, Unit};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{sample_surface, RigidTransform, SurfaceSample, Vec3};
use crate::graspgen::{
    label_samples, reference_axes, CollisionGeometry, GraspError, GraspLabel, GraspPose, GripperModel, LabelConfig,
    SurfaceCloud,
};
use crate::metrics::{grasp_ap, APReport, ApConfig, GroundTruthScene, MetricsError};
use crate::octree::{Octree, OctreeError};
use crate::refine::{grasp_nms, refine_pipeline, Reconstruction, RefinementConfig};
use crate::scene::{Primitive, Scene, SceneError, SceneObject};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Grasp(#[from] GraspError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Octree(#[from] OctreeError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    pub num_scenes: usize,
    pub seed: u64,
    /// Surface area per labeled sample, m².
    pub rho: f64,
    /// Surface area per dense contact/ground-truth point, m².
    pub contact_density: f64,
    pub octree_depth: u8,
    /// Noisy predictions drawn around each labeled sample.
    pub predictions_per_sample: usize,
    /// Anchor noise standard deviation, m.
    pub translation_noise: f64,
    /// View and angle noise standard deviation, radians.
    pub rotation_noise: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            num_scenes: 5,
            seed: 0,
            rho: 0.001,
            contact_density: 6e-6,
            octree_depth: 6,
            predictions_per_sample: 4,
            translation_noise: 0.003,
            rotation_noise: 5f64.to_radians(),
        }
    }
}

/// 3–4 random primitives resting on a table at z = 0, spaced so that their
/// bounding circles keep at least 2 cm apart.
pub fn random_scene(rng: &mut impl Rng) -> Scene {
    let n = rng.random_range(3..=4);
    let mut meshes = Vec::new();
    let mut objects = Vec::new();
    let mut placed: Vec<(f64, f64, f64)> = Vec::new();
    for id in 1..=n as u32 {
        let (prim, half_height, radius) = match rng.random_range(0..3) {
            0 => {
                let h = [
                    rng.random_range(0.012..0.03),
                    rng.random_range(0.012..0.03),
                    rng.random_range(0.015..0.05),
                ];
                (
                    Primitive::Cuboid { half_extents: h },
                    h[2],
                    (h[0] * h[0] + h[1] * h[1]).sqrt(),
                )
            }
            1 => {
                let r = rng.random_range(0.015..0.03);
                (
                    Primitive::Sphere {
                        radius: r,
                        subdivisions: 3,
                    },
                    r,
                    r,
                )
            }
            _ => {
                let r = rng.random_range(0.012..0.03);
                let h = rng.random_range(0.04..0.12);
                (
                    Primitive::Cylinder {
                        radius: r,
                        height: h,
                        segments: 32,
                    },
                    h / 2.0,
                    r,
                )
            }
        };
        let (x, y) = loop {
            let (x, y) = (rng.random_range(-0.15..0.15), rng.random_range(-0.15..0.15));
            if placed
                .iter()
                .all(|(px, py, pr)| ((x - px).powi(2) + (y - py).powi(2)).sqrt() >= pr + radius + 0.02)
            {
                break (x, y);
            }
        };
        placed.push((x, y, radius));
        let yaw = rng.random_range(0.0..PI);
        meshes.push(prim.mesh());
        objects.push(SceneObject {
            id,
            mesh: meshes.len() - 1,
            pose: RigidTransform::from_axis_angle(Vec3::z(), yaw, Vec3::new(x, y, half_height)),
        });
    }
    Scene::new(meshes, objects, Some(0.0)).expect("generated scene is valid")
}

/// Per-sample labels for every object of a scene, with contacts and
/// collisions taken against the whole scene and its table.
pub struct SceneLabels {
    pub samples: Vec<(u32, SurfaceSample, GraspLabel)>,
    pub surface: SurfaceCloud,
}

impl SceneLabels {
    pub fn best_grasps(&self) -> Vec<GraspPose> {
        self.samples.iter().filter_map(|(_, _, l)| l.best).collect()
    }

    pub fn for_object(&self, id: u32) -> Vec<(SurfaceSample, GraspLabel)> {
        self.samples
            .iter()
            .filter(|(o, _, _)| *o == id)
            .map(|(_, s, l)| (*s, l.clone()))
            .collect()
    }
}

pub fn label_scene(
    scene: &Scene,
    gripper: &GripperModel,
    cfg: &LabelConfig,
    seed: u64,
) -> Result<SceneLabels, BenchError> {
    let mut clouds = Vec::new();
    let mut samples = Vec::new();
    for (k, (o, m)) in scene.objects().iter().zip(scene.world_meshes()).enumerate() {
        let s = seed.wrapping_mul(1000).wrapping_add(2 * k as u64);
        clouds.push(SurfaceCloud::sample_mesh(m, cfg.contact_density, s + 1)?);
        samples.extend(
            sample_surface(m, cfg.rho, s)
                .map_err(GraspError::from)?
                .into_iter()
                .map(|x| (o.id, x)),
        );
    }
    let surface = SurfaceCloud::merged(&clouds);
    let collision = CollisionGeometry::from_points(surface.points().to_vec()).with_support_plane(scene.support_plane());
    let only: Vec<SurfaceSample> = samples.iter().map(|x| x.1).collect();
    let labels = label_samples(&only, &surface, &collision, gripper, cfg);
    let samples = samples
        .into_iter()
        .zip(labels)
        .map(|((id, s), mut l)| {
            if let Some(b) = l.best.as_mut() {
                b.object_id = id;
            }
            (id, s, l)
        })
        .collect();
    Ok(SceneLabels { samples, surface })
}

fn perturb_view(v: &Vec3, sigma: f64, rng: &mut impl Rng) -> Vec3 {
    let (y0, z0) = reference_axes(v);
    let phi = rng.random_range(0.0..2.0 * PI);
    let axis = Unit::new_normalize(y0 * phi.cos() + z0 * phi.sin());
    let tilt = Normal::new(0.0, sigma).expect("finite sigma").sample(rng);
    Rotation3::from_axis_angle(&axis, tilt) * v
}

/// Stand-in for a learned predictor: around every labeled sample it emits
/// noisy copies of the ground-truth best grasp (anchor, view and angle
/// jittered, width and depth drawn at random, scores scaled down). Samples
/// with no valid grasp get random grasps approaching the surface with low
/// scores.
pub fn noisy_predictions(labels: &SceneLabels, cfg: &BenchConfig, rng: &mut impl Rng) -> Vec<GraspPose> {
    let tn = Normal::new(0.0, cfg.translation_noise).expect("finite sigma");
    let rn = Normal::new(0.0, cfg.rotation_noise).expect("finite sigma");
    let mut out = Vec::new();
    for (id, s, l) in &labels.samples {
        for _ in 0..cfg.predictions_per_sample {
            let (view, angle, gs, gq) = match &l.best {
                Some(b) => (
                    perturb_view(&b.view, cfg.rotation_noise, rng),
                    b.angle + rn.sample(rng),
                    b.graspness * rng.random_range(0.6..1.0),
                    b.quality * rng.random_range(0.6..1.0),
                ),
                None => {
                    let v = loop {
                        let v = Vec3::new(tn.sample(rng), tn.sample(rng), tn.sample(rng));
                        if let Some(v) = v.try_normalize(1e-12) {
                            if v.dot(&s.normal) < 0.0 {
                                break v;
                            }
                        }
                    };
                    (
                        v,
                        rng.random_range(0.0..PI),
                        rng.random_range(0.0..0.3),
                        rng.random_range(0.0..0.5),
                    )
                }
            };
            let anchor = s.point + Vec3::new(tn.sample(rng), tn.sample(rng), tn.sample(rng));
            let mut g = GraspPose::new(
                anchor,
                view,
                angle,
                rng.random_range(0.02..0.10),
                rng.random_range(0.0..0.04),
            );
            g.graspness = gs;
            g.quality = gq;
            g.object_id = *id;
            out.push(g.to_f32_precision());
        }
    }
    out
}

/// Narrow-band octrees of every object in the world frame, labels attached.
pub fn scene_octrees(scene: &Scene, labels: &SceneLabels, depth: u8) -> Result<Vec<Octree>, BenchError> {
    scene
        .objects()
        .par_iter()
        .zip(scene.world_meshes().par_iter())
        .map(|(o, m)| {
            let mut t = Octree::from_mesh(m, depth)?;
            crate::graspgen::attach_labels(&mut t, &labels.for_object(o.id), crate::graspgen::LABEL_RADIUS)?;
            Ok(t)
        })
        .collect()
}

pub struct BenchScene {
    pub scene: Scene,
    pub labels: SceneLabels,
    pub octrees: Vec<Octree>,
    pub predictions: Vec<GraspPose>,
}

pub fn scene_seed(seed: u64, index: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64)
}

pub fn build_scene(index: usize, cfg: &BenchConfig, gripper: &GripperModel) -> Result<BenchScene, BenchError> {
    let seed = scene_seed(cfg.seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = random_scene(&mut rng);
    let lcfg = LabelConfig {
        rho: cfg.rho,
        contact_density: cfg.contact_density,
        ..LabelConfig::default()
    };
    let labels = label_scene(&scene, gripper, &lcfg, seed)?;
    let octrees = scene_octrees(&scene, &labels, cfg.octree_depth)?;
    let predictions = noisy_predictions(&labels, cfg, &mut rng);
    Ok(BenchScene {
        scene,
        labels,
        octrees,
        predictions,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BenchReport {
    pub unrefined: APReport,
    pub refined: APReport,
    pub labeled_samples: usize,
    pub predictions: usize,
    pub generate_seconds: f64,
    pub refine_seconds: f64,
    pub evaluate_seconds: f64,
}

/// Generate, refine (against each scene's octrees plus the table) and
/// evaluate both prediction sets against the ground-truth meshes.
pub fn run(cfg: &BenchConfig, gripper: &GripperModel, rcfg: &RefinementConfig) -> Result<BenchReport, BenchError> {
    let t0 = Instant::now();
    let scenes = (0..cfg.num_scenes)
        .map(|i| build_scene(i, cfg, gripper))
        .collect::<Result<Vec<_>, _>>()?;
    let t1 = Instant::now();
    let mut unrefined = Vec::new();
    let mut refined = Vec::new();
    for s in &scenes {
        let recon = Reconstruction::from_octrees(s.octrees.iter())?.with_support_plane(s.scene.support_plane());
        unrefined.push(grasp_nms(&s.predictions, rcfg));
        refined.push(refine_pipeline(&s.predictions, &recon, gripper, rcfg));
    }
    let t2 = Instant::now();
    let gt = scenes
        .iter()
        .enumerate()
        .map(|(i, s)| {
            GroundTruthScene::new(
                s.scene.world_meshes().to_vec(),
                s.scene.support_plane(),
                cfg.contact_density,
                scene_seed(cfg.seed, i) ^ 0x5eed,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let acfg = ApConfig { top_k: rcfg.top_k };
    let un = grasp_ap(&unrefined, &gt, gripper, &acfg)?;
    let re = grasp_ap(&refined, &gt, gripper, &acfg)?;
    let t3 = Instant::now();
    Ok(BenchReport {
        unrefined: un,
        refined: re,
        labeled_samples: scenes.iter().map(|s| s.labels.samples.len()).sum(),
        predictions: scenes.iter().map(|s| s.predictions.len()).sum(),
        generate_seconds: (t1 - t0).as_secs_f64(),
        refine_seconds: (t2 - t1).as_secs_f64(),
        evaluate_seconds: (t3 - t2).as_secs_f64(),
    })
}
