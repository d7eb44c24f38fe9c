//! Sparse octrees whose occupied leaves all live at the maximum depth.
//!
//! Leaves are kept in ascending Morton order, and every per-leaf attribute is
//! a parallel array of the same length. Centers are not stored: they follow
//! from the code, the root cube and the depth.

mod format;
pub mod morton;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Aabb, TriangleMesh, Vec3};
use crate::graspgen::GraspLabel;

pub use format::{HEADER_LEN, MAGIC, VERSION};

pub const MAX_DEPTH: u8 = 16;
/// Default leaf depth: 64 cells per axis.
pub const DEFAULT_DEPTH: u8 = 6;
/// Default padding of a per-object cube beyond the object's bounding box.
pub const DEFAULT_PADDING: f64 = 0.1;
/// SDF truncation in leaf widths.
pub const TRUNCATION_LEAVES: f64 = 2.0;

#[derive(Debug, Error)]
pub enum OctreeError {
    #[error("depth {0} outside 1..=16")]
    DepthOutOfRange(u8),
    #[error("{points} points but {features} feature values for dimension {dim}")]
    FeatureMismatch { points: usize, features: usize, dim: usize },
    #[error("leaves lack {0}")]
    MissingAttributes(&'static str),
    #[error("attribute array has {got} entries for {leaves} leaves")]
    AttributeLength { leaves: usize, got: usize },
    #[error("corrupt header: {0}")]
    CorruptHeader(String),
    #[error("unsupported version {found} (expected {expected})")]
    VersionMismatch { found: u16, expected: u16 },
    #[error("truncated or corrupt leaf data at byte {0}")]
    CorruptData(usize),
    #[error("bounds half extent must be positive")]
    InvalidBounds,
}

/// Axis-aligned root cube. Stored in `f32` so files round-trip exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CubeBounds {
    pub center: [f32; 3],
    pub half_extent: f32,
}

impl CubeBounds {
    pub fn new(center: Vec3, half_extent: f64) -> Self {
        Self {
            center: [center.x as f32, center.y as f32, center.z as f32],
            half_extent: half_extent as f32,
        }
    }

    /// Cube centered on `aabb`, with side = longest extent × (1 + `padding`).
    pub fn around(aabb: &Aabb, padding: f64) -> Self {
        let half = 0.5 * aabb.extent().max() * (1.0 + padding);
        Self::new(aabb.center(), half.max(1e-6))
    }

    pub fn center(&self) -> Vec3 {
        Vec3::new(self.center[0] as f64, self.center[1] as f64, self.center[2] as f64)
    }

    pub fn half(&self) -> f64 {
        self.half_extent as f64
    }

    pub fn min(&self) -> Vec3 {
        self.center() - Vec3::repeat(self.half())
    }

    pub fn cell_width(&self, depth: u8) -> f64 {
        2.0 * self.half() / (1u64 << depth) as f64
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        let c = self.center();
        let h = self.half();
        (0..3).all(|a| p[a] >= c[a] - h && p[a] <= c[a] + h)
    }

    /// Integer cell of `p` at `depth`, or `None` outside the cube.
    pub fn cell_of(&self, p: &Vec3, depth: u8) -> Option<[u32; 3]> {
        if !self.contains(p) {
            return None;
        }
        let n = 1u64 << depth;
        let w = self.cell_width(depth);
        let min = self.min();
        let mut out = [0u32; 3];
        for a in 0..3 {
            let i = ((p[a] - min[a]) / w).floor() as i64;
            out[a] = i.clamp(0, n as i64 - 1) as u32;
        }
        Some(out)
    }

    pub fn cell_center(&self, cell: [u32; 3], depth: u8) -> Vec3 {
        let w = self.cell_width(depth);
        let min = self.min();
        Vec3::new(
            min.x + (cell[0] as f64 + 0.5) * w,
            min.y + (cell[1] as f64 + 0.5) * w,
            min.z + (cell[2] as f64 + 0.5) * w,
        )
    }
}

/// A voxel cube in world coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Voxel {
    pub center: Vec3,
    pub half_extent: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct BuildStats {
    /// Input points outside the root cube.
    pub dropped: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Octree {
    bounds: CubeBounds,
    depth: u8,
    feature_dim: usize,
    codes: Vec<u64>,
    features: Vec<f32>,
    sdf: Option<Vec<f32>>,
    normals: Option<Vec<[f32; 3]>>,
    grasp_labels: Option<Vec<Option<GraspLabel>>>,
}

fn check_depth(depth: u8) -> Result<(), OctreeError> {
    if (1..=MAX_DEPTH).contains(&depth) {
        Ok(())
    } else {
        Err(OctreeError::DepthOutOfRange(depth))
    }
}

impl Octree {
    pub fn empty(bounds: CubeBounds, depth: u8, feature_dim: usize) -> Result<Self, OctreeError> {
        check_depth(depth)?;
        if bounds.half_extent.is_nan() || bounds.half_extent <= 0.0 {
            return Err(OctreeError::InvalidBounds);
        }
        Ok(Self {
            bounds,
            depth,
            feature_dim,
            codes: Vec::new(),
            features: Vec::new(),
            sdf: None,
            normals: None,
            grasp_labels: None,
        })
    }

    /// One leaf per occupied depth-`depth` cell; the leaf feature is the mean
    /// of the features of the points in that cell. `features` is row-major
    /// `points.len() × feature_dim`. Points outside `bounds` are dropped.
    pub fn build_from_points(
        points: &[Vec3],
        features: &[f32],
        feature_dim: usize,
        bounds: CubeBounds,
        depth: u8,
    ) -> Result<(Self, BuildStats), OctreeError> {
        let mut tree = Self::empty(bounds, depth, feature_dim)?;
        if features.len() != points.len() * feature_dim {
            return Err(OctreeError::FeatureMismatch {
                points: points.len(),
                features: features.len(),
                dim: feature_dim,
            });
        }
        let mut cells: BTreeMap<u64, (Vec<f64>, usize)> = BTreeMap::new();
        let mut stats = BuildStats::default();
        for (i, p) in points.iter().enumerate() {
            let Some([x, y, z]) = bounds.cell_of(p, depth) else {
                stats.dropped += 1;
                continue;
            };
            let entry = cells
                .entry(morton::encode(x, y, z))
                .or_insert_with(|| (vec![0.0; feature_dim], 0));
            for (acc, f) in entry
                .0
                .iter_mut()
                .zip(&features[i * feature_dim..(i + 1) * feature_dim])
            {
                *acc += *f as f64;
            }
            entry.1 += 1;
        }
        tree.codes.reserve(cells.len());
        tree.features.reserve(cells.len() * feature_dim);
        for (code, (sum, count)) in cells {
            tree.codes.push(code);
            tree.features.extend(sum.iter().map(|s| (s / count as f64) as f32));
        }
        Ok((tree, stats))
    }

    /// Samples a signed distance function on the leaf lattice. A leaf is kept
    /// when `|φ(center)|` is within the truncation band (two leaf widths);
    /// normals are the normalized central-difference gradient with a one-leaf step.
    pub fn from_sdf<F>(bounds: CubeBounds, depth: u8, sdf: F) -> Result<Self, OctreeError>
    where
        F: Fn(&Vec3) -> f64 + Sync,
    {
        let mut tree = Self::empty(bounds, depth, 0)?;
        let trunc = tree.truncation();
        // φ is 1-Lipschitz, so a node whose center is farther than
        // trunc + half-diagonal from the surface holds no band leaves.
        let mut frontier = vec![(0u64, 0u8)];
        let mut leaves = Vec::new();
        while let Some((code, level)) = frontier.pop() {
            let (c, half) = tree.node_cube(level, code);
            if sdf(&c).abs() > trunc + half * 3f64.sqrt() {
                continue;
            }
            if level == depth {
                leaves.push(code);
                continue;
            }
            for child in 0..8u64 {
                frontier.push(((code << 3) | child, level + 1));
            }
        }
        leaves.sort_unstable();
        let h = bounds.cell_width(depth);
        let attrs: Vec<Option<(f32, [f32; 3])>> = leaves
            .par_iter()
            .map(|&code| {
                let p = tree.center_of_code(code);
                let phi = sdf(&p);
                if phi.abs() > trunc {
                    return None;
                }
                let mut g = Vec3::zeros();
                for a in 0..3 {
                    let mut e = Vec3::zeros();
                    e[a] = h;
                    g[a] = sdf(&(p + e)) - sdf(&(p - e));
                }
                let n = g.try_normalize(1e-300).unwrap_or_else(Vec3::z);
                Some((phi as f32, [n.x as f32, n.y as f32, n.z as f32]))
            })
            .collect();
        let mut sdf_vals = Vec::new();
        let mut normals = Vec::new();
        for (code, a) in leaves.into_iter().zip(attrs) {
            if let Some((phi, n)) = a {
                tree.codes.push(code);
                sdf_vals.push(phi);
                normals.push(n);
            }
        }
        tree.sdf = Some(sdf_vals);
        tree.normals = Some(normals);
        Ok(tree)
    }

    /// Narrow-band octree of a watertight mesh over a padded per-object cube.
    pub fn from_mesh(mesh: &TriangleMesh, depth: u8) -> Result<Self, OctreeError> {
        let bounds = CubeBounds::around(&mesh.bounds(), DEFAULT_PADDING);
        Self::from_sdf(bounds, depth, |p| {
            mesh.signed_distance(p)
                .unwrap_or_else(|_| mesh.closest_point(p).map_or(f64::INFINITY, |c| c.distance))
        })
    }

    pub fn bounds(&self) -> &CubeBounds {
        &self.bounds
    }

    pub fn depth(&self) -> u8 {
        self.depth
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn codes(&self) -> &[u64] {
        &self.codes
    }

    pub fn leaf_width(&self) -> f64 {
        self.bounds.cell_width(self.depth)
    }

    pub fn truncation(&self) -> f64 {
        TRUNCATION_LEAVES * self.leaf_width()
    }

    pub fn feature(&self, leaf: usize) -> &[f32] {
        &self.features[leaf * self.feature_dim..(leaf + 1) * self.feature_dim]
    }

    pub fn sdf(&self) -> Option<&[f32]> {
        self.sdf.as_deref()
    }

    pub fn normals(&self) -> Option<&[[f32; 3]]> {
        self.normals.as_deref()
    }

    pub fn grasp_labels(&self) -> Option<&[Option<GraspLabel>]> {
        self.grasp_labels.as_deref()
    }

    /// Sets SDF values (clamped to the truncation band) and unit normals.
    pub fn set_surface_attributes(&mut self, sdf: Vec<f32>, normals: Vec<[f32; 3]>) -> Result<(), OctreeError> {
        for len in [sdf.len(), normals.len()] {
            if len != self.len() {
                return Err(OctreeError::AttributeLength {
                    leaves: self.len(),
                    got: len,
                });
            }
        }
        let t = self.truncation() as f32;
        self.sdf = Some(sdf.into_iter().map(|v| v.clamp(-t, t)).collect());
        self.normals = Some(
            normals
                .into_iter()
                .map(|n| {
                    let v = Vec3::new(n[0] as f64, n[1] as f64, n[2] as f64);
                    let v = v.try_normalize(1e-30).unwrap_or_else(Vec3::z);
                    [v.x as f32, v.y as f32, v.z as f32]
                })
                .collect(),
        );
        Ok(())
    }

    /// Attaches grasp labels, rounded to `f32` precision.
    pub fn set_grasp_labels(&mut self, labels: Vec<Option<GraspLabel>>) -> Result<(), OctreeError> {
        if labels.len() != self.len() {
            return Err(OctreeError::AttributeLength {
                leaves: self.len(),
                got: labels.len(),
            });
        }
        self.grasp_labels = Some(
            labels
                .into_iter()
                .map(|l| {
                    l.map(|mut l| {
                        l.best = l.best.map(|g| g.to_f32_precision());
                        l
                    })
                })
                .collect(),
        );
        Ok(())
    }

    pub fn center_of_code(&self, code: u64) -> Vec3 {
        self.bounds.cell_center(morton::decode(code), self.depth)
    }

    pub fn leaf_center(&self, leaf: usize) -> Vec3 {
        self.center_of_code(self.codes[leaf])
    }

    pub fn leaf_centers(&self) -> Vec<Vec3> {
        self.codes.iter().map(|&c| self.center_of_code(c)).collect()
    }

    pub fn find_leaf(&self, code: u64) -> Option<usize> {
        self.codes.binary_search(&code).ok()
    }

    /// Center and half extent of the node `code` at `level` (0 = root).
    pub fn node_cube(&self, level: u8, code: u64) -> (Vec3, f64) {
        let cell = morton::decode(code);
        (
            self.bounds.cell_center(cell, level),
            0.5 * self.bounds.cell_width(level),
        )
    }

    /// Occupied node codes at `level`, ascending. Level `depth` gives the leaves.
    pub fn occupied_nodes(&self, level: u8) -> Vec<u64> {
        let shift = 3 * (self.depth.saturating_sub(level)) as u32;
        let mut out: Vec<u64> = self.codes.iter().map(|c| c >> shift).collect();
        out.dedup();
        out
    }

    pub fn voxels_at(&self, level: u8) -> Vec<Voxel> {
        self.occupied_nodes(level)
            .into_iter()
            .map(|c| {
                let (center, half_extent) = self.node_cube(level, c);
                Voxel { center, half_extent }
            })
            .collect()
    }

    /// Indices of the occupied leaves among the 26 face/edge/corner neighbors.
    pub fn neighbors(&self, leaf: usize) -> Vec<usize> {
        let [x, y, z] = morton::decode(self.codes[leaf]);
        let n = 1i64 << self.depth;
        let mut out = Vec::new();
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let (nx, ny, nz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                    if [nx, ny, nz].iter().any(|&v| v < 0 || v >= n) {
                        continue;
                    }
                    if let Some(i) = self.find_leaf(morton::encode(nx as u32, ny as u32, nz as u32)) {
                        out.push(i);
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Projects each leaf center onto the zero level set: `p − φ·n`.
    pub fn extract_surface(&self) -> Result<Vec<(Vec3, Vec3)>, OctreeError> {
        let sdf = self.sdf.as_ref().ok_or(OctreeError::MissingAttributes("sdf"))?;
        let normals = self.normals.as_ref().ok_or(OctreeError::MissingAttributes("normals"))?;
        Ok(self
            .codes
            .iter()
            .zip(sdf.iter().zip(normals))
            .map(|(&code, (&phi, n))| {
                let n = Vec3::new(n[0] as f64, n[1] as f64, n[2] as f64);
                (self.center_of_code(code) - n * phi as f64, n)
            })
            .collect())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        format::encode(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, OctreeError> {
        format::decode(bytes)
    }
}
