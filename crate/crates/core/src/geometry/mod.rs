//! Meshes, rigid transforms, the pinhole camera, surface sampling and
//! distance queries.

mod bvh;
mod camera;
pub mod io;
mod mesh;
pub mod primitives;
mod sampling;
mod spatial;
mod transform;

use thiserror::Error;

pub use bvh::Aabb;
pub use camera::CameraModel;
pub use mesh::{closest_point_on_triangle, ray_triangle, ClosestPoint, RayHit, TriangleMesh};
pub use sampling::{sample_count, sample_surface, sample_surface_n, AreaSampler, SurfaceSample, MIN_AREA};
pub use spatial::{KdTree, PointGrid};
pub use transform::{rotation_from_uniform, RigidTransform};

pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("mesh surface area is below {MIN_AREA} m²")]
    ZeroAreaMesh,
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("signed distance requested on a mesh that is not watertight")]
    NonWatertight,
    #[error("triangle {triangle} references a vertex out of range")]
    IndexOutOfRange { triangle: usize },
    #[error("expected {expected} vertex normals, got {got}")]
    NormalCount { expected: usize, got: usize },
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("rotation is not proper orthonormal (det = {det})")]
    InvalidRotation { det: f64 },
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("sampling density must be positive, got {0}")]
    InvalidDensity(f64),
    #[error("unsupported mesh format: {0}")]
    UnsupportedFormat(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
