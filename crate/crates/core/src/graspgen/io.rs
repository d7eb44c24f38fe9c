//! Grasp files.
//!
//! JSON lines: one object per grasp with keys `anchor`, `v`, `a`, `w`, `d`,
//! `s`, `q`, `object_id`.
//!
//! Packed binary, little-endian: magic `GRSP`, `u32` version (1), `u64` count,
//! then per grasp 12 `f32` in the order anchor xyz, v xyz, a, w, d, s, q,
//! object_id.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use super::{GraspError, GraspPose, PACKED_FIELDS};

const MAGIC: &[u8; 4] = b"GRSP";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> GraspError + '_ {
    move |e| GraspError::Io {
        path: path.display().to_string(),
        source: e,
    }
}

pub fn to_jsonl(grasps: &[GraspPose]) -> String {
    let mut out = String::new();
    for g in grasps {
        out.push_str(&serde_json::to_string(g).expect("grasp serializes"));
        out.push('\n');
    }
    out
}

pub fn from_jsonl(text: &str) -> Result<Vec<GraspPose>, GraspError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| GraspError::Parse(format!("line {}: {e}", i + 1))))
        .collect()
}

pub fn write_jsonl(path: &Path, grasps: &[GraspPose]) -> Result<(), GraspError> {
    std::fs::write(path, to_jsonl(grasps)).map_err(io_err(path))
}

pub fn read_jsonl(path: &Path) -> Result<Vec<GraspPose>, GraspError> {
    let f = std::fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let g =
            serde_json::from_str(&line).map_err(|e| GraspError::Parse(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(g);
    }
    Ok(out)
}

pub fn to_packed(grasps: &[GraspPose]) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + grasps.len() * PACKED_FIELDS * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(grasps.len() as u64).to_le_bytes());
    for g in grasps {
        for v in g.to_record() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn from_packed(bytes: &[u8]) -> Result<Vec<GraspPose>, GraspError> {
    let bad = |m: &str| GraspError::Parse(format!("packed grasps: {m}"));
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(bad("bad header"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(bad(&format!("version {version}")));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let rec = PACKED_FIELDS * 4;
    let body = &bytes[HEADER_LEN..];
    if (body.len() as u64) != n.saturating_mul(rec as u64) {
        return Err(bad("length does not match count"));
    }
    Ok(body
        .chunks_exact(rec)
        .map(|c| {
            let mut r = [0f32; PACKED_FIELDS];
            for (k, v) in r.iter_mut().enumerate() {
                *v = f32::from_le_bytes(c[4 * k..4 * k + 4].try_into().unwrap());
            }
            GraspPose::from_record(&r)
        })
        .collect())
}

pub fn write_packed(path: &Path, grasps: &[GraspPose]) -> Result<(), GraspError> {
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&to_packed(grasps)).map_err(io_err(path))
}

pub fn read_packed(path: &Path) -> Result<Vec<GraspPose>, GraspError> {
    from_packed(&std::fs::read(path).map_err(io_err(path))?)
}

/// Reads either format, by extension (`.jsonl`/`.json` or anything else as packed).
pub fn read_grasps(path: &Path) -> Result<Vec<GraspPose>, GraspError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("jsonl") | Some("json") => read_jsonl(path),
        _ => read_packed(path),
    }
}
