use nalgebra::{Matrix3, Vector2};
use serde::{Deserialize, Serialize};

use super::{GeometryError, Vec3};

/// Pinhole intrinsics. Pixel `(u, v)` has its center at integer coordinates;
/// the camera frame is x right, y down, z forward.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraModel {
    pub const DEFAULT_WIDTH: u32 = 640;
    pub const DEFAULT_HEIGHT: u32 = 480;
    pub const DEFAULT_FOCAL: f64 = 600.0;

    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, GeometryError> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx > 0.0
            && self.cx < self.width as f64
            && self.cy > 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(GeometryError::InvalidCamera(format!("{self:?}")))
        }
    }

    pub fn intrinsic_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Ray direction with unit z component, so a ray parameter equals z-depth.
    #[inline]
    pub fn pixel_ray(&self, u: f64, v: f64) -> Vec3 {
        Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// `depth · K⁻¹ (u, v, 1)` in the camera frame.
    #[inline]
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vec3 {
        self.pixel_ray(u, v) * depth
    }

    /// Continuous image coordinates; `None` for points at or behind the camera plane.
    #[inline]
    pub fn project(&self, p: &Vec3) -> Option<Vector2<f64>> {
        if p.z <= 0.0 {
            return None;
        }
        Some(Vector2::new(
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        ))
    }

    /// Nearest pixel center containing a projected point, if inside the image.
    #[inline]
    pub fn pixel_of(&self, p: &Vec3) -> Option<(u32, u32)> {
        let uv = self.project(p)?;
        let (u, v) = (uv.x.round(), uv.y.round());
        if u < 0.0 || v < 0.0 || u >= self.width as f64 || v >= self.height as f64 {
            return None;
        }
        Some((u as u32, v as u32))
    }
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            fx: Self::DEFAULT_FOCAL,
            fy: Self::DEFAULT_FOCAL,
            cx: Self::DEFAULT_WIDTH as f64 / 2.0,
            cy: Self::DEFAULT_HEIGHT as f64 / 2.0,
            width: Self::DEFAULT_WIDTH,
            height: Self::DEFAULT_HEIGHT,
        }
    }
}
