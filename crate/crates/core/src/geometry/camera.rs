use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::GeometryError;

/// Pinhole intrinsics with zero skew.
///
/// Pixel coordinates are continuous; the center of the top-left pixel is
/// `(0, 0)` and the image domain is `[0, width-1] x [0, height-1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(
        fx: f64,
        fy: f64,
        cx: f64,
        cy: f64,
        width: usize,
        height: usize,
    ) -> Result<Self, GeometryError> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let finite = [self.fx, self.fy, self.cx, self.cy].iter().all(|v| v.is_finite());
        if !finite {
            return Err(GeometryError::InvalidIntrinsics("non-finite entries".into()));
        }
        if self.fx <= 0.0 || self.fy <= 0.0 {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx = {}, fy = {})",
                self.fx, self.fy
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::InvalidIntrinsics("zero image dimensions".into()));
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Closed-form inverse of [`Self::matrix`].
    pub fn inverse_matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            1.0 / self.fx,
            0.0,
            -self.cx / self.fx,
            0.0,
            1.0 / self.fy,
            -self.cy / self.fy,
            0.0,
            0.0,
            1.0,
        )
    }

    /// Unit-z viewing ray through pixel `p`: `K^-1 (u, v, 1)`.
    pub fn ray(&self, p: Vector2<f64>) -> Vector3<f64> {
        Vector3::new((p.x - self.cx) / self.fx, (p.y - self.cy) / self.fy, 1.0)
    }

    /// Whether `p` lies inside the closed image domain.
    pub fn contains(&self, p: Vector2<f64>) -> bool {
        p.x >= 0.0
            && p.y >= 0.0
            && p.x <= (self.width - 1) as f64
            && p.y <= (self.height - 1) as f64
    }

    /// Intrinsics of the image downscaled by `factor` (0 < factor <= 1).
    ///
    /// Uses the pixel-center convention: the continuous coordinate of pixel
    /// `i` at scale `s` is `(i + 0.5) / s - 0.5` in the original image, hence
    /// `cx' = (cx + 0.5) * s - 0.5`.
    pub fn scaled(&self, factor: f64) -> Result<Self, GeometryError> {
        if !(factor > 0.0 && factor <= 1.0) {
            return Err(GeometryError::InvalidIntrinsics(format!(
                "scale factor must be in (0, 1], got {factor}"
            )));
        }
        let width = ((self.width as f64) * factor).round().max(1.0) as usize;
        let height = ((self.height as f64) * factor).round().max(1.0) as usize;
        Self::new(
            self.fx * factor,
            self.fy * factor,
            (self.cx + 0.5) * factor - 0.5,
            (self.cy + 0.5) * factor - 0.5,
            width,
            height,
        )
    }
}

/// Projects a camera-frame point to pixel coordinates.
///
/// Fails if the point is at or behind the camera plane (`z <= 1e-12`).
pub fn project(k: &CameraIntrinsics, point: Vector3<f64>) -> Result<Vector2<f64>, GeometryError> {
    if point.z <= 1e-12 {
        return Err(GeometryError::BehindCamera { z: point.z });
    }
    Ok(Vector2::new(
        k.fx * point.x / point.z + k.cx,
        k.fy * point.y / point.z + k.cy,
    ))
}

/// Lifts pixel `p` to the camera-frame point at z-depth `depth`.
pub fn backproject(
    k: &CameraIntrinsics,
    p: Vector2<f64>,
    depth: f64,
) -> Result<Vector3<f64>, GeometryError> {
    if !(depth > 0.0) {
        return Err(GeometryError::BehindCamera { z: depth });
    }
    Ok(k.ray(p) * depth)
}
