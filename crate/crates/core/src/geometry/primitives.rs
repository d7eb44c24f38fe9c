//! Procedural meshes centered at the origin with outward counter-clockwise winding.

use std::collections::HashMap;

use super::{TriangleMesh, Vec3};

/// Axis-aligned box with the given half extents. Each face has its own four
/// vertices so interpolated normals equal face normals.
pub fn cuboid(half: Vec3) -> TriangleMesh {
    let mut vertices = Vec::with_capacity(24);
    let mut normals = Vec::with_capacity(24);
    let mut triangles = Vec::with_capacity(12);
    for axis in 0..3 {
        for sign in [1.0, -1.0] {
            let mut n = Vec3::zeros();
            n[axis] = sign;
            let (u_axis, v_axis) = ((axis + 1) % 3, (axis + 2) % 3);
            let base = vertices.len() as u32;
            for (su, sv) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
                let mut p = Vec3::zeros();
                p[axis] = sign * half[axis];
                p[u_axis] = su * half[u_axis];
                p[v_axis] = sv * half[v_axis];
                vertices.push(p);
                normals.push(n);
            }
            // (u, v, n) is right-handed, so CCW in (u, v) faces +n.
            if sign > 0.0 {
                triangles.push([base, base + 1, base + 2]);
                triangles.push([base, base + 2, base + 3]);
            } else {
                triangles.push([base, base + 2, base + 1]);
                triangles.push([base, base + 3, base + 2]);
            }
        }
    }
    TriangleMesh::new(vertices, triangles, Some(normals)).expect("valid cuboid")
}

/// Single-sided square of side `side` in the z = 0 plane facing +z.
pub fn square(side: f64) -> TriangleMesh {
    let h = side / 2.0;
    let vertices = vec![
        Vec3::new(-h, -h, 0.0),
        Vec3::new(h, -h, 0.0),
        Vec3::new(h, h, 0.0),
        Vec3::new(-h, h, 0.0),
    ];
    TriangleMesh::new(vertices, vec![[0, 1, 2], [0, 2, 3]], Some(vec![Vec3::z(); 4])).expect("valid square")
}

/// Geodesic sphere from a subdivided icosahedron with radial normals.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                verts.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let normals = verts.clone();
    let vertices = verts.into_iter().map(|v| v * radius).collect();
    TriangleMesh::new(vertices, faces, Some(normals)).expect("valid icosphere")
}

/// Closed cylinder along z with flat caps; side vertices carry radial normals.
pub fn cylinder(radius: f64, height: f64, segments: u32) -> TriangleMesh {
    let h = height / 2.0;
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut tris = Vec::new();
    let ring = |i: u32| {
        let a = std::f64::consts::TAU * i as f64 / segments as f64;
        (a.cos(), a.sin())
    };
    // Side: two rings.
    for i in 0..segments {
        let (c, s) = ring(i);
        vertices.push(Vec3::new(radius * c, radius * s, -h));
        vertices.push(Vec3::new(radius * c, radius * s, h));
        normals.push(Vec3::new(c, s, 0.0));
        normals.push(Vec3::new(c, s, 0.0));
    }
    for i in 0..segments {
        let j = (i + 1) % segments;
        let (b0, t0, b1, t1) = (2 * i, 2 * i + 1, 2 * j, 2 * j + 1);
        tris.push([b0, b1, t1]);
        tris.push([b0, t1, t0]);
    }
    // Caps.
    for (z, nz) in [(h, 1.0), (-h, -1.0)] {
        let center = vertices.len() as u32;
        vertices.push(Vec3::new(0.0, 0.0, z));
        normals.push(Vec3::new(0.0, 0.0, nz));
        for i in 0..segments {
            let (c, s) = ring(i);
            vertices.push(Vec3::new(radius * c, radius * s, z));
            normals.push(Vec3::new(0.0, 0.0, nz));
        }
        for i in 0..segments {
            let a = center + 1 + i;
            let b = center + 1 + (i + 1) % segments;
            if nz > 0.0 {
                tris.push([center, a, b]);
            } else {
                tris.push([center, b, a]);
            }
        }
    }
    TriangleMesh::new(vertices, tris, Some(normals)).expect("valid cylinder")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn outward(mesh: &TriangleMesh) -> bool {
        let c = mesh.bounds().center();
        (0..mesh.triangles().len()).all(|t| {
            let [a, b, cc] = mesh.corners(t);
            let centroid = (a + b + cc) / 3.0;
            mesh.face_normal(t).dot(&(centroid - c)) > 0.0
        })
    }

    #[test]
    fn primitives_are_closed_and_outward() {
        for m in [
            cuboid(Vec3::new(0.1, 0.2, 0.3)),
            icosphere(0.5, 2),
            cylinder(0.03, 0.1, 24),
        ] {
            assert!(m.is_watertight());
            assert!(outward(&m));
        }
    }

    #[test]
    fn cuboid_area() {
        let m = cuboid(Vec3::repeat(0.5));
        assert!((m.surface_area() - 6.0).abs() < 1e-12);
    }
}
