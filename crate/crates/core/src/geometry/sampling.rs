use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GeometryError, TriangleMesh, Vec3};

/// Areas below this are treated as empty.
pub const MIN_AREA: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceSample {
    pub point: Vec3,
    pub normal: Vec3,
    pub triangle_id: usize,
}

/// Number of samples for `rho` square meters of surface per sample.
pub fn sample_count(area: f64, rho: f64) -> usize {
    (area / rho).round() as usize
}

/// Draws `round(A / rho)` area-weighted uniform samples, `rho` being the
/// surface area per sample in m².
pub fn sample_surface(mesh: &TriangleMesh, rho: f64, seed: u64) -> Result<Vec<SurfaceSample>, GeometryError> {
    if rho.is_nan() || rho <= 0.0 {
        return Err(GeometryError::InvalidDensity(rho));
    }
    let sampler = AreaSampler::new(mesh)?;
    let n = sample_count(sampler.total_area(), rho);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| sampler.draw(&mut rng)).collect())
}

/// Draws exactly `n` area-weighted samples.
pub fn sample_surface_n(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<Vec<SurfaceSample>, GeometryError> {
    let sampler = AreaSampler::new(mesh)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n).map(|_| sampler.draw(&mut rng)).collect())
}

/// Inverse-CDF triangle selection plus uniform barycentric sampling.
pub struct AreaSampler<'a> {
    mesh: &'a TriangleMesh,
    cdf: Vec<f64>,
}

impl<'a> AreaSampler<'a> {
    pub fn new(mesh: &'a TriangleMesh) -> Result<Self, GeometryError> {
        let mut acc = 0.0;
        let cdf: Vec<f64> = (0..mesh.triangles().len())
            .map(|t| {
                acc += mesh.triangle_area(t);
                acc
            })
            .collect();
        if acc < MIN_AREA {
            return Err(GeometryError::ZeroAreaMesh);
        }
        Ok(Self { mesh, cdf })
    }

    pub fn total_area(&self) -> f64 {
        *self.cdf.last().unwrap()
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> SurfaceSample {
        let target = rng.random::<f64>() * self.total_area();
        let tri = self.cdf.partition_point(|&c| c <= target).min(self.cdf.len() - 1);
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = r1.sqrt();
        let bary = Vec3::new(1.0 - s, s * (1.0 - r2), s * r2);
        let [a, b, c] = self.mesh.corners(tri);
        SurfaceSample {
            point: a * bary.x + b * bary.y + c * bary.z,
            normal: self.mesh.interpolated_normal(tri, &bary),
            triangle_id: tri,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::primitives;

    #[test]
    fn unit_cube_count() {
        let cube = primitives::cuboid(Vec3::repeat(0.5));
        assert_eq!(sample_surface(&cube, 0.005, 1).unwrap().len(), 1200);
    }

    #[test]
    fn square_plate_samples_face_up() {
        // 0.01 m² / 0.005 m² per sample.
        let plate = primitives::square(0.1);
        let s = sample_surface(&plate, 0.005, 3).unwrap();
        assert_eq!(s.len(), 2);
        assert!(s.iter().all(|x| x.normal == Vec3::z() && x.point.z == 0.0));
    }

    #[test]
    fn zero_area_mesh_is_rejected() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        let mesh = TriangleMesh::new(vec![p, p, p * 2.0], vec![[0, 1, 2]], None).unwrap();
        assert!(matches!(
            sample_surface(&mesh, 0.005, 0),
            Err(GeometryError::ZeroAreaMesh)
        ));
    }

    #[test]
    fn deterministic_given_seed() {
        let s = primitives::icosphere(0.05, 2);
        let a = sample_surface(&s, 1e-4, 42).unwrap();
        let b = sample_surface(&s, 1e-4, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_surface(&s, 1e-4, 43).unwrap());
    }

    #[test]
    fn samples_lie_on_their_triangle() {
        let m = primitives::cylinder(0.02, 0.1, 16);
        for s in sample_surface_n(&m, 500, 9).unwrap() {
            let [a, b, c] = m.corners(s.triangle_id);
            let (q, _) = crate::geometry::closest_point_on_triangle(&s.point, &a, &b, &c);
            assert!((q - s.point).norm() < 1e-9);
        }
    }
}
