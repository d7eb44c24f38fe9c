//! Binary octree files.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! offset size  field
//! 0      4     magic "OCTZ"
//! 4      2     u16 version
//! 6      1     u8 depth
//! 7      16    f32 × 4 bounds: center x, y, z, half extent
//! 23     8     u64 leaf count N
//! 31     1     u8 attribute flags (bit 0 sdf, bit 1 normals, bit 2 grasp labels)
//! 32     4     u32 feature dimension D
//! 36     ...   N leaf records in ascending code order:
//!              u64 code
//!              f32 × D feature
//!              f32 sdf                       (flag bit 0)
//!              f32 × 3 normal                (flag bit 1)
//!              grasp label                   (flag bit 2):
//!                u8 present; if 1:
//!                  u32 V, f32 × V view graspness,
//!                  u8 has_best; if 1: f32 × 12 packed grasp record
//! ```

use super::{CubeBounds, Octree, OctreeError};
use crate::graspgen::{GraspLabel, GraspPose, PACKED_FIELDS};

pub const MAGIC: &[u8; 4] = b"OCTZ";
pub const VERSION: u16 = 1;
/// Byte length of the fixed header (everything before the first leaf record).
pub const HEADER_LEN: usize = 36;

const FLAG_SDF: u8 = 1;
const FLAG_NORMALS: u8 = 2;
const FLAG_GRASPS: u8 = 4;

pub(super) fn encode(tree: &Octree) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + tree.len() * (8 + 4 * tree.feature_dim + 16));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(tree.depth);
    for c in tree.bounds.center {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out.extend_from_slice(&tree.bounds.half_extent.to_le_bytes());
    out.extend_from_slice(&(tree.len() as u64).to_le_bytes());
    let mut flags = 0u8;
    if tree.sdf.is_some() {
        flags |= FLAG_SDF;
    }
    if tree.normals.is_some() {
        flags |= FLAG_NORMALS;
    }
    if tree.grasp_labels.is_some() {
        flags |= FLAG_GRASPS;
    }
    out.push(flags);
    out.extend_from_slice(&(tree.feature_dim as u32).to_le_bytes());
    debug_assert_eq!(out.len(), HEADER_LEN);

    let f32s = |out: &mut Vec<u8>, vals: &[f32]| {
        for v in vals {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    for (i, code) in tree.codes.iter().enumerate() {
        out.extend_from_slice(&code.to_le_bytes());
        f32s(&mut out, tree.feature(i));
        if let Some(sdf) = &tree.sdf {
            f32s(&mut out, &[sdf[i]]);
        }
        if let Some(normals) = &tree.normals {
            f32s(&mut out, &normals[i]);
        }
        if let Some(labels) = &tree.grasp_labels {
            match &labels[i] {
                None => out.push(0),
                Some(label) => {
                    out.push(1);
                    out.extend_from_slice(&(label.graspness.len() as u32).to_le_bytes());
                    f32s(&mut out, &label.graspness);
                    match &label.best {
                        None => out.push(0),
                        Some(g) => {
                            out.push(1);
                            f32s(&mut out, &g.to_record());
                        }
                    }
                }
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], OctreeError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(OctreeError::CorruptData(self.pos)),
        }
    }

    fn u8(&mut self) -> Result<u8, OctreeError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, OctreeError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, OctreeError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f32(&mut self) -> Result<f32, OctreeError> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f32s(&mut self, n: usize, out: &mut Vec<f32>) -> Result<(), OctreeError> {
        let raw = self.take(n.checked_mul(4).ok_or(OctreeError::CorruptData(self.pos))?)?;
        out.extend(raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())));
        Ok(())
    }
}

pub(super) fn decode(bytes: &[u8]) -> Result<Octree, OctreeError> {
    if bytes.len() < HEADER_LEN {
        return Err(OctreeError::CorruptHeader(format!(
            "{} bytes, header needs {HEADER_LEN}",
            bytes.len()
        )));
    }
    if &bytes[..4] != MAGIC {
        return Err(OctreeError::CorruptHeader("bad magic".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(OctreeError::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let mut r = Reader { bytes, pos: 6 };
    let depth = r.u8()?;
    let bounds = CubeBounds {
        center: [r.f32()?, r.f32()?, r.f32()?],
        half_extent: r.f32()?,
    };
    let count = r.u64()?;
    let flags = r.u8()?;
    let feature_dim = r.u32()? as usize;
    if flags & !(FLAG_SDF | FLAG_NORMALS | FLAG_GRASPS) != 0 {
        return Err(OctreeError::CorruptHeader(format!("unknown flags {flags:#x}")));
    }
    let mut tree = Octree::empty(bounds, depth, feature_dim).map_err(|e| OctreeError::CorruptHeader(e.to_string()))?;
    // Each record holds at least a code, so a count beyond the payload is corrupt.
    if count > ((bytes.len() - HEADER_LEN) / 8) as u64 {
        return Err(OctreeError::CorruptHeader(format!(
            "leaf count {count} exceeds payload"
        )));
    }
    let n = count as usize;
    let limit = 1u64 << (3 * depth as u32);
    let mut sdf = (flags & FLAG_SDF != 0).then(|| Vec::with_capacity(n));
    let mut normals = (flags & FLAG_NORMALS != 0).then(|| Vec::with_capacity(n));
    let mut labels = (flags & FLAG_GRASPS != 0).then(|| Vec::with_capacity(n));
    tree.codes.reserve(n);
    let mut scratch = Vec::new();
    for _ in 0..n {
        let at = r.pos;
        let code = r.u64()?;
        if code >= limit || tree.codes.last().is_some_and(|&last| last >= code) {
            return Err(OctreeError::CorruptData(at));
        }
        tree.codes.push(code);
        r.f32s(feature_dim, &mut tree.features)?;
        if let Some(s) = sdf.as_mut() {
            s.push(r.f32()?);
        }
        if let Some(ns) = normals.as_mut() {
            ns.push([r.f32()?, r.f32()?, r.f32()?]);
        }
        if let Some(ls) = labels.as_mut() {
            let label = match r.u8()? {
                0 => None,
                1 => {
                    let views = r.u32()? as usize;
                    let mut graspness = Vec::new();
                    r.f32s(views, &mut graspness)?;
                    let best = match r.u8()? {
                        0 => None,
                        1 => {
                            scratch.clear();
                            r.f32s(PACKED_FIELDS, &mut scratch)?;
                            let rec: [f32; PACKED_FIELDS] = scratch[..].try_into().unwrap();
                            Some(GraspPose::from_record(&rec))
                        }
                        _ => return Err(OctreeError::CorruptData(r.pos - 1)),
                    };
                    Some(GraspLabel { graspness, best })
                }
                _ => return Err(OctreeError::CorruptData(r.pos - 1)),
            };
            ls.push(label);
        }
    }
    if r.pos != bytes.len() {
        return Err(OctreeError::CorruptData(r.pos));
    }
    tree.sdf = sdf;
    tree.normals = normals;
    tree.grasp_labels = labels;
    Ok(tree)
}
