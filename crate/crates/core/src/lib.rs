//! Geometric core for single-view grasp synthesis and evaluation.
//!
//! The crate covers the parts of a reconstruction-based grasping pipeline
//! that need no learning:
//!
//! - [`geometry`]: meshes, transforms, the pinhole camera, sampling, distance queries
//! - [`octree`]: sparse Morton-ordered voxel octrees with per-leaf attributes
//! - [`scene`]: multi-object scenes, depth/mask rendering and unprojection
//! - [`occlusion`]: per-voxel self/inter-object occlusion fields
//! - [`graspgen`]: parallel-jaw gripper, candidate enumeration, contacts,
//!   collision, antipodal quality and dense labels
//! - [`refine`]: contact-based width/depth refinement, collision filtering, grasp NMS
//! - [`metrics`]: Chamfer distance, F-score, normal consistency and friction-swept AP
//! - [`bench`]: a deterministic synthetic desk-scale benchmark
//!
//! A reconstruction is anything that yields an [`octree::Octree`] or a point
//! set; [`octree::Octree::from_sdf`] turns any signed distance function into one.

pub mod bench;
pub mod geometry;
pub mod graspgen;
pub mod metrics;
pub mod occlusion;
pub mod octree;
pub mod refine;
pub mod scene;

pub use geometry::{CameraModel, RigidTransform, SurfaceSample, TriangleMesh, Vec3};
pub use graspgen::{ContactPair, GraspLabel, GraspPose, GripperModel};
pub use octree::Octree;

// The guide under `book/` is compiled as doctests so its snippets stay in sync.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/octree.md")]
    mod octree {}
    #[doc = include_str!("../../../book/src/scene.md")]
    mod scene {}
    #[doc = include_str!("../../../book/src/occlusion.md")]
    mod occlusion {}
    #[doc = include_str!("../../../book/src/grasps.md")]
    mod grasps {}
    #[doc = include_str!("../../../book/src/refinement.md")]
    mod refinement {}
    #[doc = include_str!("../../../book/src/metrics.md")]
    mod metrics {}
}
