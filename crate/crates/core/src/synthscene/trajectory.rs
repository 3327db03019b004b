use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::SceneError;
use crate::geometry::{rotation_from_angle_axis, Pose};

/// Analytic camera path shapes. All paths start at the world origin heading
/// along +z on the y = 0 plane.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrajectoryKind {
    /// Drive straight along +z.
    Straight,
    /// Constant-curvature turn; positive radius curves toward +x.
    Arc { radius: f64 },
    /// Forward drive with a sinusoidal lateral sway
    /// `x(z) = amplitude * sin(2 pi z / wavelength)`.
    Sinusoid { amplitude: f64, wavelength: f64 },
}

/// How path length is distributed over the frames.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpeedProfile {
    #[default]
    Uniform,
    /// Smoothstep ramp: slow at both ends, fastest in the middle.
    EaseInOut,
}

impl SpeedProfile {
    /// Fraction of the path length covered at normalized time `u` in [0, 1].
    fn progress(&self, u: f64) -> f64 {
        match self {
            SpeedProfile::Uniform => u,
            SpeedProfile::EaseInOut => u * u * (3.0 - 2.0 * u),
        }
    }
}

/// Camera center and yaw (about +y) at path position `s` meters.
fn center_and_yaw(kind: &TrajectoryKind, s: f64) -> (Vector3<f64>, f64) {
    match kind {
        TrajectoryKind::Straight => (Vector3::new(0.0, 0.0, s), 0.0),
        TrajectoryKind::Arc { radius } => {
            let theta = s / radius;
            (
                Vector3::new(radius * (1.0 - theta.cos()), 0.0, radius * theta.sin()),
                theta,
            )
        }
        TrajectoryKind::Sinusoid { amplitude, wavelength } => {
            let phase = 2.0 * std::f64::consts::PI / wavelength;
            (
                Vector3::new(amplitude * (phase * s).sin(), 0.0, s),
                (amplitude * phase * (phase * s).cos()).atan(),
            )
        }
    }
}

/// Deterministic world-to-camera poses along an analytic path.
///
/// For the arc and sinusoid the camera yaws to face the path tangent; `s`
/// measures arc length for straight/arc paths and forward distance for the
/// sinusoid.
pub fn make_trajectory(
    kind: &TrajectoryKind,
    length: f64,
    count: usize,
    speed: &SpeedProfile,
) -> Result<Vec<Pose>, SceneError> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(SceneError::InvalidSpec(format!(
            "trajectory length must be positive, got {length}"
        )));
    }
    if count < 2 {
        return Err(SceneError::InvalidSpec(format!(
            "trajectory needs at least 2 frames, got {count}"
        )));
    }
    match kind {
        TrajectoryKind::Arc { radius } if radius.abs() < 1e-9 || !radius.is_finite() => {
            return Err(SceneError::InvalidSpec(format!("arc radius {radius} unusable")));
        }
        TrajectoryKind::Sinusoid { amplitude, wavelength }
            if !(wavelength > &1e-9) || !amplitude.is_finite() =>
        {
            return Err(SceneError::InvalidSpec(
                "sinusoid needs a positive wavelength and finite amplitude".into(),
            ));
        }
        _ => {}
    }
    Ok((0..count)
        .map(|k| {
            let u = k as f64 / (count - 1) as f64;
            let (center, yaw) = center_and_yaw(kind, length * speed.progress(u));
            // Camera-to-world rotation is the yaw; the world-to-camera pose
            // inverts it.
            let r_wc = rotation_from_angle_axis(Vector3::new(0.0, yaw, 0.0));
            Pose::from_parts(&r_wc.transpose(), -(r_wc.transpose() * center))
        })
        .collect())
}
