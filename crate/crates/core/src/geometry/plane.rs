use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{GeometryError, Pose};

/// The road normal of a perfectly level forward-facing camera (y points
/// down, so the road normal points up, toward negative y).
pub const CANONICAL_NORMAL: Vector3<f64> = Vector3::new(0.0, -1.0, 0.0);

/// Ground plane in a camera frame: points `P` on the road satisfy
/// `N . P + h = 0` with unit normal `N` and camera height `h > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundPlane {
    normal: Vector3<f64>,
    height: f64,
}

impl GroundPlane {
    /// Normalizes `normal`; rejects zero/non-finite normals and `height <= 0`.
    pub fn new(normal: Vector3<f64>, height: f64) -> Result<Self, GeometryError> {
        if !normal.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidPlane("non-finite normal".into()));
        }
        let norm = normal.norm();
        if norm < 1e-12 {
            return Err(GeometryError::InvalidPlane("zero-length normal".into()));
        }
        if !(height > 0.0) || !height.is_finite() {
            return Err(GeometryError::InvalidPlane(format!(
                "camera height must be positive and finite, got {height}"
            )));
        }
        Ok(Self { normal: normal / norm, height })
    }

    /// Level plane with the canonical normal at camera height `height`.
    pub fn canonical(height: f64) -> Result<Self, GeometryError> {
        Self::new(CANONICAL_NORMAL, height)
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.normal
    }

    pub fn height(&self) -> f64 {
        self.height
    }
}

/// Small correction of a base plane: rotations of the normal about the
/// camera x and z axes plus a camera-height offset.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlaneCorrection {
    /// Rotation of the normal about the camera x axis, radians.
    pub rot_x: f64,
    /// Rotation of the normal about the camera z axis, radians.
    pub rot_z: f64,
    /// Additive change of the camera height, meters.
    pub height_offset: f64,
}

/// Elementary rotation about the x axis.
pub fn rot_x(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

/// Elementary rotation about the z axis.
pub fn rot_z(angle: f64) -> Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Applies a correction to a base plane:
/// `N = Rx(rot_x) * Rz(rot_z) * N_base`, `h = h_base + height_offset`.
///
/// Fails if the corrected height is not positive.
pub fn apply_plane_correction(
    base: &GroundPlane,
    correction: &PlaneCorrection,
) -> Result<GroundPlane, GeometryError> {
    let normal = rot_x(correction.rot_x) * rot_z(correction.rot_z) * base.normal();
    GroundPlane::new(normal, base.height() + correction.height_offset)
}

/// Signed distance of a camera-frame point from the plane: `N . P + h`.
///
/// Positive for points on the camera side of the road.
pub fn plane_residual(plane: &GroundPlane, point: Vector3<f64>) -> f64 {
    plane.normal().dot(&point) + plane.height()
}

/// Re-expresses a plane in the target frame of `pose`
/// (`P_target = R * P_source + t`):
/// `N' = R * N`, `h' = h - N' . t`.
///
/// Fails if the transformed height is not positive (the target camera
/// center would be on or below the road).
pub fn transform_plane(pose: &Pose, plane: &GroundPlane) -> Result<GroundPlane, GeometryError> {
    let normal = pose.rotation_matrix() * plane.normal();
    let height = plane.height() - normal.dot(&pose.translation());
    GroundPlane::new(normal, height)
}
