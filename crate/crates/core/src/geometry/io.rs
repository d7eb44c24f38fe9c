//! Mesh loading (PLY, OBJ) and point-cloud PLY export.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use ply_rs::parser::Parser;
use ply_rs::ply::{DefaultElement, Property};

use super::{GeometryError, TriangleMesh, Vec3};

/// Loads a PLY or OBJ mesh, multiplying coordinates by `scale`.
pub fn load_mesh(path: &Path, scale: f64) -> Result<TriangleMesh, GeometryError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let mesh = match ext.as_str() {
        "ply" => read_ply(path)?,
        "obj" => read_obj(path)?,
        _ => return Err(GeometryError::UnsupportedFormat(path.display().to_string())),
    };
    if scale == 1.0 {
        Ok(mesh)
    } else {
        mesh.scaled(scale)
    }
}

fn open(path: &Path) -> Result<File, GeometryError> {
    File::open(path).map_err(|e| GeometryError::Io {
        path: path.display().to_string(),
        source: e,
    })
}

fn scalar(p: &Property) -> Option<f64> {
    Some(match *p {
        Property::Char(v) => v as f64,
        Property::UChar(v) => v as f64,
        Property::Short(v) => v as f64,
        Property::UShort(v) => v as f64,
        Property::Int(v) => v as f64,
        Property::UInt(v) => v as f64,
        Property::Float(v) => v as f64,
        Property::Double(v) => v,
        _ => return None,
    })
}

fn index_list(p: &Property) -> Option<Vec<u32>> {
    Some(match p {
        Property::ListChar(v) => v.iter().map(|&x| x as u32).collect(),
        Property::ListUChar(v) => v.iter().map(|&x| x as u32).collect(),
        Property::ListShort(v) => v.iter().map(|&x| x as u32).collect(),
        Property::ListUShort(v) => v.iter().map(|&x| x as u32).collect(),
        Property::ListInt(v) => v.iter().map(|&x| x as u32).collect(),
        Property::ListUInt(v) => v.clone(),
        _ => return None,
    })
}

pub fn read_ply(path: &Path) -> Result<TriangleMesh, GeometryError> {
    let mut reader = BufReader::new(open(path)?);
    let parser = Parser::<DefaultElement>::new();
    let ply = parser
        .read_ply(&mut reader)
        .map_err(|e| GeometryError::Parse(format!("{}: {e}", path.display())))?;
    let bad = |what: &str| GeometryError::Parse(format!("{}: {what}", path.display()));
    let verts = ply.payload.get("vertex").ok_or_else(|| bad("no vertex element"))?;
    let mut vertices = Vec::with_capacity(verts.len());
    let mut normals = Vec::with_capacity(verts.len());
    let mut has_normals = true;
    for v in verts {
        let get = |k: &str| v.get(k).and_then(scalar);
        let p = match (get("x"), get("y"), get("z")) {
            (Some(x), Some(y), Some(z)) => Vec3::new(x, y, z),
            _ => return Err(bad("vertex without x/y/z")),
        };
        vertices.push(p);
        match (get("nx"), get("ny"), get("nz")) {
            (Some(x), Some(y), Some(z)) => normals.push(Vec3::new(x, y, z)),
            _ => has_normals = false,
        }
    }
    let mut triangles = Vec::new();
    if let Some(faces) = ply.payload.get("face") {
        for f in faces {
            let idx = f
                .get("vertex_indices")
                .or_else(|| f.get("vertex_index"))
                .and_then(index_list)
                .ok_or_else(|| bad("face without vertex_indices"))?;
            fan(&idx, &mut triangles);
        }
    }
    TriangleMesh::new(vertices, triangles, has_normals.then_some(normals))
}

/// Triangulates a convex polygon as a fan.
fn fan(idx: &[u32], out: &mut Vec<[u32; 3]>) {
    for k in 1..idx.len().saturating_sub(1) {
        out.push([idx[0], idx[k], idx[k + 1]]);
    }
}

pub fn read_obj(path: &Path) -> Result<TriangleMesh, GeometryError> {
    let mut reader = BufReader::new(open(path)?);
    let opts = tobj::LoadOptions {
        triangulate: true,
        single_index: true,
        ..Default::default()
    };
    let (models, _) = tobj::load_obj_buf(&mut reader, &opts, |_| Err(tobj::LoadError::OpenFileFailed))
        .map_err(|e| GeometryError::Parse(format!("{}: {e}", path.display())))?;
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut triangles = Vec::new();
    let mut all_normals = true;
    for m in &models {
        let mesh = &m.mesh;
        let base = vertices.len() as u32;
        vertices.extend(
            mesh.positions
                .chunks_exact(3)
                .map(|c| Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64)),
        );
        if mesh.normals.len() == mesh.positions.len() {
            normals.extend(
                mesh.normals
                    .chunks_exact(3)
                    .map(|c| Vec3::new(c[0] as f64, c[1] as f64, c[2] as f64)),
            );
        } else {
            all_normals = false;
        }
        triangles.extend(
            mesh.indices
                .chunks_exact(3)
                .map(|c| [c[0] + base, c[1] + base, c[2] + base]),
        );
    }
    TriangleMesh::new(vertices, triangles, all_normals.then_some(normals))
}

/// Writes an ASCII PLY mesh with vertex normals.
pub fn write_mesh_ply(path: &Path, mesh: &TriangleMesh) -> Result<(), GeometryError> {
    let io_err = |e| GeometryError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    (|| -> std::io::Result<()> {
        writeln!(w, "ply\nformat ascii 1.0")?;
        writeln!(w, "element vertex {}", mesh.vertices().len())?;
        writeln!(w, "property double x\nproperty double y\nproperty double z")?;
        writeln!(w, "property double nx\nproperty double ny\nproperty double nz")?;
        writeln!(w, "element face {}", mesh.triangles().len())?;
        writeln!(w, "property list uchar int vertex_indices\nend_header")?;
        for (p, n) in mesh.vertices().iter().zip(mesh.normals()) {
            writeln!(w, "{} {} {} {} {} {}", p.x, p.y, p.z, n.x, n.y, n.z)?;
        }
        for t in mesh.triangles() {
            writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
        }
        w.flush()
    })()
    .map_err(io_err)
}

/// Writes a binary little-endian point-cloud PLY. `scalars` adds named
/// per-point float properties.
pub fn write_points_ply(
    path: &Path,
    points: &[Vec3],
    normals: Option<&[Vec3]>,
    scalars: &[(&str, &[f32])],
) -> Result<(), GeometryError> {
    let io_err = |e| GeometryError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    (|| -> std::io::Result<()> {
        writeln!(w, "ply\nformat binary_little_endian 1.0")?;
        writeln!(w, "element vertex {}", points.len())?;
        writeln!(w, "property float x\nproperty float y\nproperty float z")?;
        if normals.is_some() {
            writeln!(w, "property float nx\nproperty float ny\nproperty float nz")?;
        }
        for (name, _) in scalars {
            writeln!(w, "property float {name}")?;
        }
        writeln!(w, "end_header")?;
        for (i, p) in points.iter().enumerate() {
            for c in p.iter() {
                w.write_all(&(*c as f32).to_le_bytes())?;
            }
            if let Some(ns) = normals {
                for c in ns[i].iter() {
                    w.write_all(&(*c as f32).to_le_bytes())?;
                }
            }
            for (_, vals) in scalars {
                w.write_all(&vals[i].to_le_bytes())?;
            }
        }
        w.flush()
    })()
    .map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;

    #[test]
    fn ply_round_trip_and_scale() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.ply");
        let cube = primitives::cuboid(Vec3::repeat(0.5));
        write_mesh_ply(&path, &cube).unwrap();
        let back = load_mesh(&path, 1.0).unwrap();
        assert_eq!(back.vertices(), cube.vertices());
        assert_eq!(back.triangles(), cube.triangles());
        assert!(back.is_watertight());
        let scaled = load_mesh(&path, 0.1).unwrap();
        assert!((scaled.surface_area() - 0.06).abs() < 1e-12);
    }

    #[test]
    fn obj_quads_are_triangulated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("quad.obj");
        std::fs::write(&path, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
        let m = load_mesh(&path, 1.0).unwrap();
        assert_eq!(m.triangles().len(), 2);
        assert!((m.surface_area() - 1.0).abs() < 1e-12);
        assert!((m.normals()[0] - Vec3::z()).norm() < 1e-12);
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_mesh(Path::new("/nonexistent/x.ply"), 1.0).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/x.ply"));
    }
}
