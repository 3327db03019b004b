//! Camera-height scale recovery.

use crate::geometry::Pose;
use crate::imaging::DepthMap;

use super::EstimationError;

/// Rescales a depth map and pose to metric scale from the calibrated
/// camera height: both are multiplied by `s = camera_height /
/// estimated_height`. Rotation is untouched, and the plane normal needs no
/// change either — the plane height itself rescales with the frame, so a
/// caller pins it at `camera_height`. Fails unless both heights are
/// positive and finite.
///
/// The plane-induced homography is exactly invariant under this adjustment:
/// it depends on translation and plane height only through their ratio.
pub fn scale_adjust(
    depth: &DepthMap,
    pose: &Pose,
    camera_height: f64,
    estimated_height: f64,
) -> Result<(DepthMap, Pose), EstimationError> {
    if !(camera_height > 0.0 && camera_height.is_finite()) {
        return Err(EstimationError::InvalidState(format!(
            "camera height must be positive and finite, got {camera_height}"
        )));
    }
    if !(estimated_height > 0.0 && estimated_height.is_finite()) {
        return Err(EstimationError::InvalidState(format!(
            "estimated plane height must be positive and finite, got {estimated_height}"
        )));
    }
    let scale = camera_height / estimated_height;
    let scaled_depth = depth.scaled(scale)?;
    let scaled_pose = Pose::new(pose.angle_axis(), pose.translation() * scale);
    Ok((scaled_depth, scaled_pose))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{compose_homography, GroundPlane, PlaneCorrection};
    use crate::geometry::apply_plane_correction;
    use crate::synthscene::test_fixtures;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    #[test]
    fn matching_heights_change_nothing() {
        let depth = DepthMap::constant(4, 3, 2.0).unwrap();
        let pose = Pose::new(Vector3::new(0.0, 0.01, 0.0), Vector3::new(0.1, 0.0, -0.5));
        let (d, p) = scale_adjust(&depth, &pose, 1.5, 1.5).unwrap();
        assert_eq!(d, depth);
        assert_eq!(p, pose);
    }

    #[test]
    fn scale_is_height_ratio() {
        let depth = DepthMap::constant(4, 3, 2.0).unwrap();
        let pose = Pose::new(Vector3::zeros(), Vector3::new(0.0, 0.0, -1.0));
        let (d, p) = scale_adjust(&depth, &pose, 1.5, 1.0).unwrap();
        assert_relative_eq!(d.get(0, 0).unwrap(), 3.0, epsilon = 1e-12);
        assert_relative_eq!(p.translation().z, -1.5, epsilon = 1e-12);
        assert_eq!(p.angle_axis(), pose.angle_axis());
    }

    #[test]
    fn homography_is_invariant_under_the_adjustment() {
        let k = test_fixtures::test_camera();
        let correction = PlaneCorrection { rot_x: 0.02, rot_z: -0.01, height_offset: -0.3 };
        let plane_raw =
            apply_plane_correction(&GroundPlane::canonical(1.5).unwrap(), &correction).unwrap();
        let h_t = plane_raw.height();
        let pose = Pose::new(Vector3::new(0.001, 0.02, 0.0), Vector3::new(0.05, 0.0, -0.4));
        let depth = DepthMap::constant(4, 3, 5.0).unwrap();

        let h_raw = compose_homography(&k, &pose, &plane_raw).unwrap();
        let (_, pose_adj) = scale_adjust(&depth, &pose, 1.5, h_t).unwrap();
        let plane_adj = GroundPlane::new(plane_raw.normal(), 1.5).unwrap();
        let h_adj = compose_homography(&k, &pose_adj, &plane_adj).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(
                    h_adj.matrix()[(i, j)],
                    h_raw.matrix()[(i, j)],
                    epsilon = 1e-12,
                    max_relative = 1e-12
                );
            }
        }
    }

    #[test]
    fn nonpositive_heights_are_rejected() {
        let depth = DepthMap::constant(2, 2, 1.0).unwrap();
        let pose = Pose::identity();
        assert!(scale_adjust(&depth, &pose, 1.5, 0.0).is_err());
        assert!(scale_adjust(&depth, &pose, 1.5, -0.2).is_err());
        assert!(scale_adjust(&depth, &pose, 0.0, 1.0).is_err());
        assert!(scale_adjust(&depth, &pose, f64::NAN, 1.0).is_err());
    }
}
