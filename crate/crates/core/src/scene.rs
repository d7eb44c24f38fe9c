//! Multi-object scenes, ray-cast depth and instance-mask rendering, and
//! unprojection of masked depth back to world points.

use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};
use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{io as mesh_io, primitives, CameraModel, GeometryError, RigidTransform, TriangleMesh, Vec3};

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("object id {0} is not in the scene")]
    UnknownObjectId(u32),
    #[error("object id {0} is used twice or is 0")]
    InvalidObjectId(u32),
    #[error("object {object} refers to mesh {mesh}, but only {count} meshes exist")]
    MeshIndex { object: u32, mesh: usize, count: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("image: {0}")]
    Image(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SceneError + '_ {
    move |e| SceneError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

/// Built-in shapes usable in place of mesh files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Primitive {
    Cuboid { half_extents: [f64; 3] },
    Sphere { radius: f64, subdivisions: u32 },
    Cylinder { radius: f64, height: f64, segments: u32 },
}

impl Primitive {
    pub fn mesh(&self) -> TriangleMesh {
        match *self {
            Primitive::Cuboid { half_extents: h } => primitives::cuboid(Vec3::new(h[0], h[1], h[2])),
            Primitive::Sphere { radius, subdivisions } => primitives::icosphere(radius, subdivisions),
            Primitive::Cylinder {
                radius,
                height,
                segments,
            } => primitives::cylinder(radius, height, segments),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MeshSpec {
    File {
        path: PathBuf,
        #[serde(default = "one")]
        scale: f64,
    },
    Primitive {
        primitive: Primitive,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectSpec {
    pub id: u32,
    pub mesh: usize,
    /// 4×4 row-major object-to-world transform.
    pub pose: [f64; 16],
}

/// On-disk scene description. Relative mesh paths resolve against the file's
/// directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneFile {
    pub meshes: Vec<MeshSpec>,
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub support_plane: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct SceneObject {
    /// 1-based instance id; 0 is background.
    pub id: u32,
    pub mesh: usize,
    pub pose: RigidTransform,
}

#[derive(Clone, Debug)]
pub struct Scene {
    meshes: Vec<TriangleMesh>,
    objects: Vec<SceneObject>,
    support_plane: Option<f64>,
    world: Vec<TriangleMesh>,
}

impl Scene {
    pub fn new(
        meshes: Vec<TriangleMesh>,
        objects: Vec<SceneObject>,
        support_plane: Option<f64>,
    ) -> Result<Self, SceneError> {
        let mut seen = std::collections::BTreeSet::new();
        for o in &objects {
            if o.id == 0 || !seen.insert(o.id) {
                return Err(SceneError::InvalidObjectId(o.id));
            }
            if o.mesh >= meshes.len() {
                return Err(SceneError::MeshIndex {
                    object: o.id,
                    mesh: o.mesh,
                    count: meshes.len(),
                });
            }
        }
        let world = objects.iter().map(|o| meshes[o.mesh].transformed(&o.pose)).collect();
        Ok(Self {
            meshes,
            objects,
            support_plane,
            world,
        })
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), Vec::new(), None).expect("empty scene is valid")
    }

    pub fn from_file(file: &SceneFile, base: &Path) -> Result<Self, SceneError> {
        let meshes = file
            .meshes
            .iter()
            .map(|m| match m {
                MeshSpec::File { path, scale } => {
                    mesh_io::load_mesh(&base.join(path), *scale).map_err(SceneError::from)
                }
                MeshSpec::Primitive { primitive } => Ok(primitive.mesh()),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let objects = file
            .objects
            .iter()
            .map(|o| {
                Ok(SceneObject {
                    id: o.id,
                    mesh: o.mesh,
                    pose: RigidTransform::from_row_major(&o.pose)?,
                })
            })
            .collect::<Result<Vec<_>, SceneError>>()?;
        Self::new(meshes, objects, file.support_plane)
    }

    pub fn load(path: &Path) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        let file: SceneFile =
            serde_json::from_str(&text).map_err(|e| SceneError::Parse(format!("{}: {e}", path.display())))?;
        Self::from_file(&file, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn objects(&self) -> &[SceneObject] {
        &self.objects
    }

    pub fn object_ids(&self) -> Vec<u32> {
        self.objects.iter().map(|o| o.id).collect()
    }

    pub fn meshes(&self) -> &[TriangleMesh] {
        &self.meshes
    }

    pub fn support_plane(&self) -> Option<f64> {
        self.support_plane
    }

    /// Object meshes in the world frame, in object order.
    pub fn world_meshes(&self) -> &[TriangleMesh] {
        &self.world
    }

    pub fn world_mesh(&self, id: u32) -> Option<&TriangleMesh> {
        self.objects.iter().position(|o| o.id == id).map(|i| &self.world[i])
    }

    /// First hit along `origin + t·dir` for `t > 0`: `(t, id)`, with id 0 for
    /// the support plane. Exact ties go to the earlier object.
    pub fn raycast(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, u32)> {
        let mut best: Option<(f64, u32)> = None;
        for (o, m) in self.objects.iter().zip(&self.world) {
            let t_max = best.map_or(f64::INFINITY, |b| b.0);
            if let Some(hit) = m.raycast(origin, dir, 0.0, t_max) {
                if best.is_none_or(|b| hit.t < b.0) {
                    best = Some((hit.t, o.id));
                }
            }
        }
        if let Some(z) = self.support_plane {
            if dir.z != 0.0 {
                let t = (z - origin.z) / dir.z;
                if t > 0.0 && best.is_none_or(|b| t < b.0) {
                    best = Some((t, 0));
                }
            }
        }
        best
    }

    /// Three objects on a table at z = 0: a box, a sphere partly hidden behind
    /// it, and a cylinder.
    pub fn demo() -> Self {
        Self::from_file(&demo_scene_file(), Path::new(".")).expect("demo scene is valid")
    }
}

pub fn demo_scene_file() -> SceneFile {
    let at = |x: f64, y: f64, z: f64| RigidTransform::from_translation(Vec3::new(x, y, z)).to_row_major();
    SceneFile {
        meshes: vec![
            MeshSpec::Primitive {
                primitive: Primitive::Cuboid {
                    half_extents: [0.03, 0.02, 0.04],
                },
            },
            MeshSpec::Primitive {
                primitive: Primitive::Sphere {
                    radius: 0.035,
                    subdivisions: 3,
                },
            },
            MeshSpec::Primitive {
                primitive: Primitive::Cylinder {
                    radius: 0.025,
                    height: 0.1,
                    segments: 48,
                },
            },
        ],
        objects: vec![
            ObjectSpec {
                id: 1,
                mesh: 0,
                pose: at(0.0, 0.0, 0.04),
            },
            ObjectSpec {
                id: 2,
                mesh: 1,
                pose: at(0.03, 0.08, 0.035),
            },
            ObjectSpec {
                id: 3,
                mesh: 2,
                pose: at(-0.05, 0.11, 0.05),
            },
        ],
        support_plane: Some(0.0),
    }
}

/// Camera-to-world pose looking from `eye` at `target`: camera z forward,
/// x right, y down, with `up` projecting to image up.
pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> RigidTransform {
    let z = (target - eye).normalize();
    let x = z.cross(&up).normalize();
    let y = z.cross(&x);
    RigidTransform::new(Matrix3::from_columns(&[x, y, z]), eye).expect("orthonormal look-at frame")
}

/// Default viewpoint for the demo scene.
pub fn demo_camera_pose() -> RigidTransform {
    look_at(Vec3::new(0.0, -0.4, 0.3), Vec3::new(0.0, 0.04, 0.03), Vec3::z())
}

/// A rendered view. `depth` is camera-frame z in meters (0 = no hit) and
/// `mask` holds instance ids (0 = background), both row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SceneView {
    pub camera: CameraModel,
    /// Camera-to-world.
    pub extrinsic: RigidTransform,
    pub depth: Vec<f64>,
    pub mask: Vec<u32>,
    /// Ids of every object in the rendered scene, visible or not.
    pub object_ids: Vec<u32>,
}

/// Ray-casts one ray per pixel center. Rows are rendered in parallel.
pub fn render(scene: &Scene, camera: &CameraModel, extrinsic: &RigidTransform) -> SceneView {
    let (w, h) = (camera.width as usize, camera.height as usize);
    let origin = *extrinsic.translation();
    let rows: Vec<(Vec<f64>, Vec<u32>)> = (0..h)
        .into_par_iter()
        .map(|v| {
            let mut d = vec![0.0; w];
            let mut m = vec![0u32; w];
            for u in 0..w {
                let dir = extrinsic.apply_vector(&camera.pixel_ray(u as f64, v as f64));
                if let Some((t, id)) = scene.raycast(&origin, &dir) {
                    d[u] = t;
                    m[u] = id;
                }
            }
            (d, m)
        })
        .collect();
    let mut depth = Vec::with_capacity(w * h);
    let mut mask = Vec::with_capacity(w * h);
    for (d, m) in rows {
        depth.extend(d);
        mask.extend(m);
    }
    SceneView {
        camera: *camera,
        extrinsic: *extrinsic,
        depth,
        mask,
        object_ids: scene.object_ids(),
    }
}

/// A world point and the pixel `(u, v)` it came from.
pub type PixelPoint = (Vec3, (u32, u32));

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepthSidecar {
    pub width: u32,
    pub height: u32,
    /// Row-major 3×3 intrinsics.
    pub k: [f64; 9],
    /// Row-major 4×4 camera-to-world transform.
    pub extrinsics: [f64; 16],
    pub units: String,
}

impl SceneView {
    #[inline]
    pub fn index(&self, u: u32, v: u32) -> usize {
        v as usize * self.camera.width as usize + u as usize
    }

    pub fn depth_at(&self, u: u32, v: u32) -> f64 {
        self.depth[self.index(u, v)]
    }

    pub fn mask_at(&self, u: u32, v: u32) -> u32 {
        self.mask[self.index(u, v)]
    }

    /// World point seen at pixel `(u, v)` with depth `z`.
    pub fn pixel_to_world(&self, u: u32, v: u32, z: f64) -> Vec3 {
        self.extrinsic
            .apply_point(&self.camera.unproject(u as f64, v as f64, z))
    }

    pub fn world_to_camera(&self, p: &Vec3) -> Vec3 {
        self.extrinsic.inverse().apply_point(p)
    }

    /// Every pixel labeled `id`, unprojected to the world frame.
    pub fn unproject(&self, id: u32) -> Result<Vec<PixelPoint>, SceneError> {
        if !self.object_ids.contains(&id) {
            return Err(SceneError::UnknownObjectId(id));
        }
        let w = self.camera.width;
        Ok(self
            .mask
            .iter()
            .enumerate()
            .filter(|(_, m)| **m == id)
            .map(|(i, _)| {
                let (u, v) = (i as u32 % w, i as u32 / w);
                (self.pixel_to_world(u, v, self.depth[i]), (u, v))
            })
            .collect())
    }

    pub fn sidecar(&self) -> DepthSidecar {
        let k = self.camera.intrinsic_matrix();
        DepthSidecar {
            width: self.camera.width,
            height: self.camera.height,
            k: [
                k[(0, 0)],
                k[(0, 1)],
                k[(0, 2)],
                k[(1, 0)],
                k[(1, 1)],
                k[(1, 2)],
                k[(2, 0)],
                k[(2, 1)],
                k[(2, 2)],
            ],
            extrinsics: self.extrinsic.to_row_major(),
            units: "meters".into(),
        }
    }

    /// Depth in 0.1 mm units, saturating at 65535.
    pub fn depth_png_values(&self) -> Vec<u16> {
        self.depth
            .iter()
            .map(|d| (d * 10_000.0).round().clamp(0.0, u16::MAX as f64) as u16)
            .collect()
    }

    pub fn write_depth_png(&self, path: &Path) -> Result<(), SceneError> {
        write_u16_png(path, self.camera.width, self.camera.height, self.depth_png_values())
    }

    pub fn write_mask_png(&self, path: &Path) -> Result<(), SceneError> {
        let ids = self.mask.iter().map(|&m| m.min(u16::MAX as u32) as u16).collect();
        write_u16_png(path, self.camera.width, self.camera.height, ids)
    }

    /// Little-endian `f32` depth plus a JSON sidecar at `path` with `.json` appended.
    pub fn write_depth_raw(&self, path: &Path) -> Result<PathBuf, SceneError> {
        let bytes: Vec<u8> = self.depth.iter().flat_map(|d| (*d as f32).to_le_bytes()).collect();
        std::fs::write(path, bytes).map_err(io_err(path))?;
        let mut side = path.as_os_str().to_owned();
        side.push(".json");
        let side = PathBuf::from(side);
        let text = serde_json::to_string_pretty(&self.sidecar()).expect("sidecar serializes");
        std::fs::write(&side, text).map_err(io_err(&side))?;
        Ok(side)
    }
}

fn write_u16_png(path: &Path, w: u32, h: u32, data: Vec<u16>) -> Result<(), SceneError> {
    let img: ImageBuffer<Luma<u16>, Vec<u16>> =
        ImageBuffer::from_raw(w, h, data).ok_or_else(|| SceneError::Image("buffer size".into()))?;
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| SceneError::Image(format!("{}: {e}", path.display())))
}

/// Reads a 16-bit grayscale PNG.
pub fn read_u16_png(path: &Path) -> Result<(u32, u32, Vec<u16>), SceneError> {
    let img = image::open(path).map_err(|e| SceneError::Image(format!("{}: {e}", path.display())))?;
    let g = img.into_luma16();
    Ok((g.width(), g.height(), g.into_raw()))
}
