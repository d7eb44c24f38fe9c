use nalgebra::{Matrix3, Matrix4, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec3};

const ORTHO_TOL: f64 = 1e-6;

/// A proper rigid motion `x -> R x + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Validates `det(R) = 1` and `RᵀR = I` to 1e-6.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self, GeometryError> {
        let det = rotation.determinant();
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        if (det - 1.0).abs() > ORTHO_TOL || gram.amax() > ORTHO_TOL {
            return Err(GeometryError::InvalidRotation { det });
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        Ok(Self { rotation, translation })
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64, translation: Vec3) -> Self {
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(axis), angle);
        Self {
            rotation: *rot.matrix(),
            translation,
        }
    }

    /// Builds from a 4×4 homogeneous matrix given in row-major order.
    pub fn from_row_major(m: &[f64; 16]) -> Result<Self, GeometryError> {
        let mat = Matrix4::from_row_slice(m);
        let bottom = [mat[(3, 0)], mat[(3, 1)], mat[(3, 2)], mat[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(GeometryError::InvalidRotation { det: f64::NAN });
        }
        let r = mat.fixed_view::<3, 3>(0, 0).into_owned();
        let t = Vector3::new(mat[(0, 3)], mat[(1, 3)], mat[(2, 3)]);
        Self::new(r, t)
    }

    pub fn to_row_major(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            t.x,
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            t.y,
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)],
            t.z,
            0.0,
            0.0,
            0.0,
            1.0,
        ]
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    #[inline]
    pub fn apply_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// Uniformly random rotation from three uniform variates in [0, 1).
pub fn rotation_from_uniform(u1: f64, u2: f64, u3: f64) -> Matrix3<f64> {
    // Shoemake's subgroup algorithm.
    let (s1, s2) = ((1.0 - u1).sqrt(), u1.sqrt());
    let (t1, t2) = (std::f64::consts::TAU * u2, std::f64::consts::TAU * u3);
    let q = nalgebra::Quaternion::new(s2 * t2.cos(), s1 * t1.sin(), s1 * t1.cos(), s2 * t2.sin());
    *nalgebra::UnitQuaternion::from_quaternion(q)
        .to_rotation_matrix()
        .matrix()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_reflection() {
        let m = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        assert!(RigidTransform::new(m, Vec3::zeros()).is_err());
    }

    #[test]
    fn row_major_round_trip() {
        let t = RigidTransform::from_axis_angle(Vec3::new(1.0, 2.0, 3.0), 0.7, Vec3::new(0.1, -0.2, 0.3));
        let back = RigidTransform::from_row_major(&t.to_row_major()).unwrap();
        assert!((back.rotation() - t.rotation()).amax() < 1e-15);
        assert_eq!(back.translation(), t.translation());
    }

    #[test]
    fn inverse_composes_to_identity() {
        let t = RigidTransform::from_axis_angle(Vec3::new(0.0, 1.0, 1.0), 1.3, Vec3::new(1.0, 0.0, -2.0));
        let id = t.compose(&t.inverse());
        assert!((id.rotation() - Matrix3::identity()).amax() < 1e-12);
        assert!(id.translation().norm() < 1e-12);
    }

    #[test]
    fn uniform_rotation_is_proper() {
        let r = rotation_from_uniform(0.3, 0.6, 0.9);
        assert!(RigidTransform::new(r, Vec3::zeros()).is_ok());
    }
}
