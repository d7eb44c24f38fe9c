//! 3D occlusion fields: each voxel is split into B³ blocks and every block
//! center gets two flags, hidden behind the target itself (`o_self`) and
//! hidden behind another object (`o_inter`).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::octree::Voxel;
use crate::scene::{Scene, SceneView};

/// Blocks per voxel axis.
pub const DEFAULT_BLOCK_RESOLUTION: u32 = 8;

pub const SELF_BIT: u8 = 1;
pub const INTER_BIT: u8 = 2;

#[derive(Debug, Error)]
pub enum OcclusionError {
    #[error("voxel list is empty")]
    EmptyVoxelList,
    #[error("block resolution must be at least 1")]
    InvalidResolution,
    #[error("{0}")]
    Format(String),
}

/// Which test decides occlusion.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OcclusionMode {
    /// Mask id and depth at the pixel the block projects to.
    #[default]
    MaskDepth,
    /// First surface hit along the camera ray through the block center.
    RayIntersection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OcclusionField {
    pub voxels: Vec<Voxel>,
    pub block_resolution: u32,
    pub target_id: u32,
    /// One byte per block, `SELF_BIT | INTER_BIT`; voxel-major, then blocks
    /// in x-major order (see [`block_index`]).
    pub flags: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub num_voxels: usize,
    pub block_resolution: u32,
    pub target_id: u32,
}

/// Position of block `(i, j, k)` (x, y, z) within its voxel.
#[inline]
pub fn block_index(b: u32, i: u32, j: u32, k: u32) -> usize {
    ((i * b + j) * b + k) as usize
}

/// Centers of the B³ blocks of a voxel, in [`block_index`] order.
pub fn block_centers(voxel: &Voxel, b: u32) -> Vec<Vec3> {
    let size = 2.0 * voxel.half_extent / b as f64;
    let min = voxel.center - Vec3::repeat(voxel.half_extent);
    let mut out = Vec::with_capacity((b * b * b) as usize);
    for i in 0..b {
        for j in 0..b {
            for k in 0..b {
                out.push(min + Vec3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * size);
            }
        }
    }
    out
}

/// Depth-test tolerance: half a block diagonal.
pub fn depth_epsilon(voxel: &Voxel, b: u32) -> f64 {
    voxel.half_extent / b as f64 * 3f64.sqrt()
}

fn check(voxels: &[Voxel], b: u32) -> Result<(), OcclusionError> {
    if voxels.is_empty() {
        return Err(OcclusionError::EmptyVoxelList);
    }
    if b == 0 {
        return Err(OcclusionError::InvalidResolution);
    }
    Ok(())
}

/// Mask-plus-depth occlusion field. A block projecting to a pixel labeled
/// `target_id` gets `o_self` when its camera-frame depth exceeds the pixel
/// depth by more than the tolerance; a pixel of any other object gives
/// `o_inter` under the same test. Blocks outside the image or behind the
/// camera stay 0.
pub fn compute_occlusion_field(
    view: &SceneView,
    voxels: &[Voxel],
    target_id: u32,
    block_resolution: u32,
) -> Result<OcclusionField, OcclusionError> {
    check(voxels, block_resolution)?;
    let to_cam = view.extrinsic.inverse();
    let flags = per_voxel(voxels, block_resolution, |v, centers| {
        let eps = depth_epsilon(v, block_resolution);
        centers
            .iter()
            .map(|c| {
                let p = to_cam.apply_point(c);
                let Some((u, px)) = view.camera.pixel_of(&p) else {
                    return 0;
                };
                let (m, d) = (view.mask_at(u, px), view.depth_at(u, px));
                if m == 0 || p.z <= d + eps {
                    0
                } else if m == target_id {
                    SELF_BIT
                } else {
                    INTER_BIT
                }
            })
            .collect()
    });
    Ok(OcclusionField {
        voxels: voxels.to_vec(),
        block_resolution,
        target_id,
        flags,
    })
}

/// Ray-intersection variant: cast from the camera center through each block
/// center; if the first object surface lies more than the tolerance in front
/// of the block (in camera z), the block is flagged by that object's id.
pub fn compute_occlusion_field_raycast(
    scene: &Scene,
    view: &SceneView,
    voxels: &[Voxel],
    target_id: u32,
    block_resolution: u32,
) -> Result<OcclusionField, OcclusionError> {
    check(voxels, block_resolution)?;
    let to_cam = view.extrinsic.inverse();
    let origin = *view.extrinsic.translation();
    let flags = per_voxel(voxels, block_resolution, |v, centers| {
        let eps = depth_epsilon(v, block_resolution);
        centers
            .iter()
            .map(|c| {
                let p = to_cam.apply_point(c);
                if p.z <= 0.0 {
                    return 0;
                }
                // Direction with unit camera z so t is a z-depth.
                let dir = view.extrinsic.apply_vector(&(p / p.z));
                match scene.raycast(&origin, &dir) {
                    Some((t, id)) if id != 0 && p.z > t + eps => {
                        if id == target_id {
                            SELF_BIT
                        } else {
                            INTER_BIT
                        }
                    }
                    _ => 0,
                }
            })
            .collect()
    });
    Ok(OcclusionField {
        voxels: voxels.to_vec(),
        block_resolution,
        target_id,
        flags,
    })
}

fn per_voxel<F>(voxels: &[Voxel], b: u32, f: F) -> Vec<u8>
where
    F: Fn(&Voxel, &[Vec3]) -> Vec<u8> + Sync,
{
    voxels
        .par_iter()
        .flat_map_iter(|v| f(v, &block_centers(v, b)))
        .collect()
}

impl OcclusionField {
    pub fn blocks_per_voxel(&self) -> usize {
        (self.block_resolution as usize).pow(3)
    }

    pub fn voxel_flags(&self, voxel: usize) -> &[u8] {
        let n = self.blocks_per_voxel();
        &self.flags[voxel * n..(voxel + 1) * n]
    }

    pub fn o_self(&self, voxel: usize, block: usize) -> bool {
        self.voxel_flags(voxel)[block] & SELF_BIT != 0
    }

    pub fn o_inter(&self, voxel: usize, block: usize) -> bool {
        self.voxel_flags(voxel)[block] & INTER_BIT != 0
    }

    /// Per voxel: fraction of blocks with `o_self`, fraction with `o_inter`.
    pub fn fractions(&self) -> Vec<(f64, f64)> {
        let n = self.blocks_per_voxel() as f64;
        (0..self.voxels.len())
            .map(|i| {
                let f = self.voxel_flags(i);
                let s = f.iter().filter(|x| *x & SELF_BIT != 0).count() as f64;
                let t = f.iter().filter(|x| *x & INTER_BIT != 0).count() as f64;
                (s / n, t / n)
            })
            .collect()
    }

    pub fn header(&self) -> FieldHeader {
        FieldHeader {
            num_voxels: self.voxels.len(),
            block_resolution: self.block_resolution,
            target_id: self.target_id,
        }
    }

    /// One-line JSON header, newline, then the flags packed two bits per
    /// block (`o_self` low, `o_inter` high), LSB first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec(&self.header()).expect("header serializes");
        out.push(b'\n');
        let mut packed = vec![0u8; (self.flags.len() * 2).div_ceil(8)];
        for (i, f) in self.flags.iter().enumerate() {
            packed[i / 4] |= (f & 3) << ((i % 4) * 2);
        }
        out.extend(packed);
        out
    }

    /// Header and flags from [`to_bytes`](Self::to_bytes) output.
    pub fn parse_bytes(bytes: &[u8]) -> Result<(FieldHeader, Vec<u8>), OcclusionError> {
        let nl = bytes
            .iter()
            .position(|b| *b == b'\n')
            .ok_or_else(|| OcclusionError::Format("missing header".into()))?;
        let header: FieldHeader =
            serde_json::from_slice(&bytes[..nl]).map_err(|e| OcclusionError::Format(e.to_string()))?;
        let n = header.num_voxels * (header.block_resolution as usize).pow(3);
        let body = &bytes[nl + 1..];
        if body.len() != (n * 2).div_ceil(8) {
            return Err(OcclusionError::Format("flag payload length".into()));
        }
        let flags = (0..n).map(|i| (body[i / 4] >> ((i % 4) * 2)) & 3).collect();
        Ok((header, flags))
    }
}
