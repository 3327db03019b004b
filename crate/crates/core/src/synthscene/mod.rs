//! Deterministic synthetic road scenes with exact ground truth.
//!
//! A scene is a textured ground plane plus a set of textured boxes, rendered
//! by per-pixel ray casting from a sequence of camera poses. Texture is
//! sampled at world coordinates, so the same surface point renders to the
//! same intensity from every viewpoint, and the returned depth, road mask,
//! pose and in-camera plane are exact — which is what makes the estimator
//! and the metrics testable against known answers.
//!
//! Conventions match the rest of the crate: y points down, so the ground
//! plane of a world scene is `{P : -P.y + h = 0}` (all cameras sit at
//! world height 0, a camera `h` meters above the road). Every frame pose
//! maps world coordinates to that camera's frame.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::imaging::ImagingError;

mod noise;
mod render;
mod trajectory;

pub use noise::TextureSpec;
pub use render::{render, BoxSpec, RenderedFrame, SceneSpec};
pub use trajectory::{make_trajectory, SpeedProfile, TrajectoryKind};

/// Shared scene fixtures for tests across the crate.
#[cfg(test)]
pub(crate) mod test_fixtures {
    use nalgebra::Vector3;

    use super::{make_trajectory, BoxSpec, SceneSpec, SpeedProfile, TextureSpec, TrajectoryKind};
    use crate::geometry::{CameraIntrinsics, GroundPlane, Pose};

    pub(crate) fn test_camera() -> CameraIntrinsics {
        CameraIntrinsics::new(100.0, 100.0, 63.5, 47.5, 128, 96).unwrap()
    }

    pub(crate) fn test_boxes() -> Vec<BoxSpec> {
        vec![
            BoxSpec {
                pose: Pose::new(Vector3::zeros(), Vector3::new(3.0, -1.0, -8.0)),
                size: [1.5, 1.0, 1.5],
                albedo: [0.8, 0.75, 0.7, 0.65, 0.85, 0.6],
            },
            BoxSpec {
                pose: Pose::new(Vector3::zeros(), Vector3::new(-2.5, -0.75, -14.0)),
                size: [1.0, 1.5, 1.0],
                albedo: [0.55, 0.6, 0.65, 0.7, 0.5, 0.75],
            },
        ]
    }

    /// Textured plane + two boxes seen by a straight uniform run.
    pub(crate) fn straight_scene(frames: usize, length: f64) -> SceneSpec {
        SceneSpec {
            plane: GroundPlane::canonical(1.5).unwrap(),
            texture: TextureSpec::default(),
            boxes: test_boxes(),
            intrinsics: test_camera(),
            trajectory: make_trajectory(
                &TrajectoryKind::Straight,
                length,
                frames,
                &SpeedProfile::Uniform,
            )
            .unwrap(),
        }
    }
}

/// Intensity of rays that escape the scene.
pub const SKY_INTENSITY: f64 = 0.35;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("invalid scene: {0}")]
    InvalidSpec(String),
    #[error("frame {index} out of range for a {count}-frame trajectory")]
    FrameOutOfRange { index: usize, count: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

/// Serializable recipe for a scene: trajectory parameters instead of an
/// explicit pose list. [`SceneDescription::build`] expands it to a
/// [`SceneSpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneDescription {
    pub intrinsics: crate::geometry::CameraIntrinsics,
    /// Camera height above the road, meters.
    pub plane_height: f64,
    pub texture: TextureSpec,
    #[serde(default)]
    pub boxes: Vec<BoxSpec>,
    pub trajectory: TrajectoryKind,
    /// Path length in meters.
    pub length: f64,
    pub frames: usize,
    #[serde(default)]
    pub speed: SpeedProfile,
}

impl SceneDescription {
    pub fn build(&self) -> Result<SceneSpec, SceneError> {
        let plane = crate::geometry::GroundPlane::canonical(self.plane_height)
            .map_err(|e| SceneError::InvalidSpec(format!("bad plane height: {e}")))?;
        let trajectory =
            make_trajectory(&self.trajectory, self.length, self.frames, &self.speed)?;
        let spec = SceneSpec {
            plane,
            texture: self.texture.clone(),
            boxes: self.boxes.clone(),
            intrinsics: self.intrinsics,
            trajectory,
        };
        spec.validate()?;
        Ok(spec)
    }
}
