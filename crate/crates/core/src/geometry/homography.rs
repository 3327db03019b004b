use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use super::{CameraIntrinsics, GeometryError, GroundPlane, Pose};

/// Pixel mappings with `|w|` below this are treated as at infinity.
const INFINITY_EPS: f64 = 1e-12;

/// A 3x3 planar homography acting on pixel coordinates.
///
/// Stored raw (no fixed scale). [`Homography::normalized`] rescales so that
/// `H[2][2] = 1` for comparison and serialization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Homography {
    matrix: Matrix3<f64>,
}

impl Homography {
    /// Rejects non-finite and non-invertible matrices.
    pub fn from_matrix(matrix: Matrix3<f64>) -> Result<Self, GeometryError> {
        if !matrix.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::SingularHomography { det: f64::NAN });
        }
        // Scale-aware invertibility test: compare det against the cube of
        // the matrix magnitude so the check is invariant to the projective
        // scale of the stored matrix.
        let scale = matrix.norm() / 3.0_f64.sqrt();
        let det = matrix.determinant();
        if scale < INFINITY_EPS || det.abs() < 1e-12 * scale.powi(3) {
            return Err(GeometryError::SingularHomography { det });
        }
        Ok(Self { matrix })
    }

    pub fn identity() -> Self {
        Self { matrix: Matrix3::identity() }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    /// Rescales so `H[2][2] = 1`; fails when `|H[2][2]| < 1e-9`.
    pub fn normalized(&self) -> Result<Self, GeometryError> {
        let w = self.matrix[(2, 2)];
        if w.abs() < 1e-9 {
            return Err(GeometryError::UnnormalizableHomography { w });
        }
        Ok(Self { matrix: self.matrix / w })
    }

    pub fn inverse(&self) -> Result<Self, GeometryError> {
        self.matrix
            .try_inverse()
            .map(|matrix| Self { matrix })
            .ok_or(GeometryError::SingularHomography { det: self.matrix.determinant() })
    }

    /// Maps a pixel; `None` when the image lies at infinity.
    pub fn apply(&self, p: Vector2<f64>) -> Option<Vector2<f64>> {
        let y = self.matrix * Vector3::new(p.x, p.y, 1.0);
        // Scale-invariant at-infinity test.
        if y.z.abs() < INFINITY_EPS * y.norm().max(1.0) {
            return None;
        }
        Some(Vector2::new(y.x / y.z, y.y / y.z))
    }
}

/// The road homography induced by `plane` under camera motion `pose`
/// (current frame -> previous frame): `H = K (R - t N^T / h) K^-1`.
pub fn compose_homography(
    k: &CameraIntrinsics,
    pose: &Pose,
    plane: &GroundPlane,
) -> Result<Homography, GeometryError> {
    if plane.height().abs() < INFINITY_EPS {
        return Err(GeometryError::InvalidPlane("zero camera height".into()));
    }
    let r = pose.rotation_matrix();
    let tn = pose.translation() * plane.normal().transpose() / plane.height();
    Homography::from_matrix(k.matrix() * (r - tn) * k.inverse_matrix())
}

/// Maps a pixel through `h`; `None` when the image lies at infinity.
pub fn apply_homography(h: &Homography, p: Vector2<f64>) -> Option<Vector2<f64>> {
    h.apply(p)
}

/// Depth along the viewing ray of pixel `p` at which it meets the plane:
/// `D = -h / (N^T K^-1 p)`.
pub fn ray_plane_depth(
    k: &CameraIntrinsics,
    plane: &GroundPlane,
    p: Vector2<f64>,
) -> Result<f64, GeometryError> {
    let denom = plane.normal().dot(&k.ray(p));
    if denom.abs() < 1e-12 {
        return Err(GeometryError::RayParallelToPlane { denom });
    }
    let depth = -plane.height() / denom;
    if depth <= 0.0 {
        return Err(GeometryError::PlaneBehindCamera { depth });
    }
    Ok(depth)
}

/// Maps pixel `p` of the current frame, at z-depth `depth`, into the
/// previous frame: `p_prev ~ K (R * depth * K^-1 p + t)`.
///
/// `None` marks the pixel invalid: nonpositive depth or a transformed point
/// at or behind the previous camera plane.
pub fn reproject_pixel(
    k: &CameraIntrinsics,
    pose: &Pose,
    depth: f64,
    p: Vector2<f64>,
) -> Option<Vector2<f64>> {
    if !(depth > 0.0) {
        return None;
    }
    let moved = pose.transform_point(k.ray(p) * depth);
    if moved.z <= INFINITY_EPS {
        return None;
    }
    Some(Vector2::new(
        k.fx * moved.x / moved.z + k.cx,
        k.fy * moved.y / moved.z + k.cy,
    ))
}
