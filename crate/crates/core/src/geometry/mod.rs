//! Camera intrinsics, rigid poses, ground planes, and the plane-induced
//! homography together with its analytic derivatives.
//!
//! Conventions used throughout the crate:
//! - camera frame: x right, y down, z forward (optical axis);
//! - a pose maps source-frame points into target-frame points,
//!   `P_target = R * P_source + t`;
//! - a ground plane satisfies `N . P + h = 0` for points `P` on the plane,
//!   with unit normal `N` and `h > 0` (the camera center is above the road);
//! - the canonical road normal for a level camera is `(0, -1, 0)`.

mod camera;
mod homography;
mod jacobians;
mod plane;
mod pose;

pub use camera::{backproject, project, CameraIntrinsics};
pub use homography::{
    apply_homography, compose_homography, ray_plane_depth, reproject_pixel, Homography,
};
pub use jacobians::{homography_jacobians, HomographyJacobians};
pub use plane::{
    apply_plane_correction, plane_residual, rot_x, rot_z, transform_plane, GroundPlane,
    PlaneCorrection, CANONICAL_NORMAL,
};
pub use pose::{
    angle_axis_from_rotation, relative_pose, rotation_from_angle_axis, rotation_jacobians, skew,
    Pose,
};

/// Errors raised by geometric constructors and operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid plane: {0}")]
    InvalidPlane(String),
    #[error("point at or behind the camera plane (z = {z:.6e})")]
    BehindCamera { z: f64 },
    #[error("homography is not invertible (|det| = {det:.6e})")]
    SingularHomography { det: f64 },
    #[error("homography cannot be normalized (|H33| = {w:.6e})")]
    UnnormalizableHomography { w: f64 },
    #[error("ray is parallel to the plane (N.ray = {denom:.6e})")]
    RayParallelToPlane { denom: f64 },
    #[error("plane does not face the camera along this ray (depth = {depth:.6e})")]
    PlaneBehindCamera { depth: f64 },
    #[error("pixel maps to the line at infinity (w = {w:.6e})")]
    MapsToInfinity { w: f64 },
}
