//! Visual-odometry segment errors following the KITTI odometry protocol.

use serde::{Deserialize, Serialize};

use super::{MetricReport, MetricsError, Trajectory};
use crate::geometry::relative_pose;

/// Error of one evaluated segment, already in reporting units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoSegment {
    pub start_frame: usize,
    pub end_frame: usize,
    /// Nominal segment length in meters (the denominator of both errors).
    pub length_m: f64,
    /// Translation error over the segment, percent of the nominal length.
    pub t_err_percent: f64,
    /// Rotation error over the segment, degrees per 100 m.
    pub r_err_deg_per_100m: f64,
}

/// Aggregate segment errors plus the per-segment breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoMetrics {
    /// Mean over all segments of the per-segment translation error (%).
    pub t_err_percent: f64,
    /// Mean over all segments of the rotation error (degrees per 100 m).
    pub r_err_deg_per_100m: f64,
    pub segments: Vec<VoSegment>,
}

impl VoMetrics {
    pub fn report(&self) -> Result<MetricReport, MetricsError> {
        let mut report = MetricReport::new("vo");
        report.put("t_err_percent", self.t_err_percent)?;
        report.put("r_err_deg_per_100m", self.r_err_deg_per_100m)?;
        report.put("segments", self.segments.len() as f64)?;
        report.put_series(
            "segment_t_err_percent",
            self.segments.iter().map(|s| s.t_err_percent).collect(),
        )?;
        report.put_series(
            "segment_r_err_deg_per_100m",
            self.segments.iter().map(|s| s.r_err_deg_per_100m).collect(),
        )?;
        report.put_series(
            "segment_start_frame",
            self.segments.iter().map(|s| s.start_frame as f64).collect(),
        )?;
        report
            .put_series("segment_length_m", self.segments.iter().map(|s| s.length_m).collect())?;
        Ok(report)
    }
}

/// First frame index `j > start` whose ground-truth arc distance from
/// `start` reaches `length`; `None` when the path ends first.
fn segment_end(arc: &[f64], start: usize, length: f64) -> Option<usize> {
    (start + 1..arc.len()).find(|&j| arc[j] - arc[start] >= length)
}

/// KITTI-protocol odometry errors: for every start frame and every segment
/// length, the segment runs to the first frame at that ground-truth arc
/// distance; the relative-motion discrepancy is normalized by the nominal
/// length. Translation error is reported in percent, rotation error in
/// degrees per 100 m, each averaged over all evaluated segments.
pub fn vo_metrics(
    est: &Trajectory,
    gt: &Trajectory,
    segment_lengths_m: &[f64],
) -> Result<VoMetrics, MetricsError> {
    if est.len() != gt.len() {
        return Err(MetricsError::LengthMismatch { est: est.len(), gt: gt.len() });
    }
    if segment_lengths_m.is_empty() {
        return Err(MetricsError::InvalidConfig("no segment lengths given".into()));
    }
    if let Some(bad) = segment_lengths_m.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(MetricsError::InvalidConfig(format!(
            "segment lengths must be positive and finite, got {bad}"
        )));
    }
    let arc = gt.arc_lengths();
    let mut segments = Vec::new();
    for start in 0..gt.len() {
        for &length in segment_lengths_m {
            let Some(end) = segment_end(&arc, start, length) else { continue };
            let delta_gt = relative_pose(&gt.poses()[start], &gt.poses()[end]);
            let delta_est = relative_pose(&est.poses()[start], &est.poses()[end]);
            let error = delta_est.inverse().compose(&delta_gt);
            let t_err = error.translation().norm() / length;
            let r_err = error.rotation_angle() / length;
            segments.push(VoSegment {
                start_frame: start,
                end_frame: end,
                length_m: length,
                t_err_percent: t_err * 100.0,
                r_err_deg_per_100m: r_err.to_degrees() * 100.0,
            });
        }
    }
    if segments.is_empty() {
        return Err(MetricsError::NoUsableSegments {
            path_length: gt.path_length(),
            requested: segment_lengths_m.to_vec(),
        });
    }
    let n = segments.len() as f64;
    Ok(VoMetrics {
        t_err_percent: segments.iter().map(|s| s.t_err_percent).sum::<f64>() / n,
        r_err_deg_per_100m: segments.iter().map(|s| s.r_err_deg_per_100m).sum::<f64>() / n,
        segments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::geometry::Pose;
    use crate::synthscene::{make_trajectory, SpeedProfile, TrajectoryKind};

    /// Straight run along -z at exactly 1 m per frame (world-to-camera).
    fn straight(frames: usize) -> Trajectory {
        let poses: Vec<Pose> = (0..frames)
            .map(|k| Pose::new(Vector3::zeros(), Vector3::new(0.0, 0.0, k as f64)))
            .collect();
        Trajectory::from_world_poses(poses).unwrap()
    }

    #[test]
    fn perfect_estimate_scores_zero() {
        let gt_poses = make_trajectory(
            &TrajectoryKind::Arc { radius: 20.0 },
            12.0,
            13,
            &SpeedProfile::Uniform,
        )
        .unwrap();
        let gt = Trajectory::from_world_poses(gt_poses).unwrap();
        let m = vo_metrics(&gt, &gt, &[5.0, 10.0]).unwrap();
        assert_eq!(m.t_err_percent, 0.0);
        assert_eq!(m.r_err_deg_per_100m, 0.0);
        assert!(!m.segments.is_empty());
    }

    #[test]
    fn five_percent_translation_scale_is_exactly_five_percent() {
        let gt = straight(11);
        let est_poses: Vec<Pose> = gt
            .poses()
            .iter()
            .map(|p| Pose::new(p.angle_axis(), p.translation() * 1.05))
            .collect();
        let est = Trajectory::from_world_poses(est_poses).unwrap();
        let m = vo_metrics(&est, &gt, &[5.0, 10.0]).unwrap();
        assert!((m.t_err_percent - 5.0).abs() < 1e-9, "{}", m.t_err_percent);
        assert_eq!(m.r_err_deg_per_100m, 0.0);
        // 5 m segments start at frames 0..=5, the 10 m segment at frame 0.
        assert_eq!(m.segments.len(), 7);
    }

    #[test]
    fn one_degree_per_hundred_meters_yaw_bias_is_exactly_one() {
        let gt = straight(11);
        let rate = 1f64.to_radians() / 100.0;
        let est_poses: Vec<Pose> = gt
            .poses()
            .iter()
            .enumerate()
            .map(|(k, p)| {
                Pose::new(Vector3::new(0.0, rate * k as f64, 0.0), p.translation())
            })
            .collect();
        let est = Trajectory::from_world_poses(est_poses).unwrap();
        let m = vo_metrics(&est, &gt, &[5.0]).unwrap();
        assert!((m.r_err_deg_per_100m - 1.0).abs() < 1e-9, "{}", m.r_err_deg_per_100m);
    }

    #[test]
    fn segment_end_picks_first_frame_reaching_the_distance() {
        let arc = [0.0, 0.9, 1.8, 2.7, 3.6];
        assert_eq!(segment_end(&arc, 0, 1.8), Some(2));
        assert_eq!(segment_end(&arc, 0, 1.9), Some(3));
        assert_eq!(segment_end(&arc, 1, 0.5), Some(2));
        assert_eq!(segment_end(&arc, 0, 4.0), None);
    }

    #[test]
    fn too_short_path_reports_usable_length() {
        let gt = straight(3);
        let err = vo_metrics(&gt, &gt, &[100.0]).unwrap_err();
        match err {
            MetricsError::NoUsableSegments { path_length, requested } => {
                assert_eq!(path_length, 2.0);
                assert_eq!(requested, vec![100.0]);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn mismatched_lengths_and_bad_config_are_rejected() {
        let gt = straight(5);
        let est = straight(4);
        assert!(matches!(
            vo_metrics(&est, &gt, &[2.0]),
            Err(MetricsError::LengthMismatch { est: 4, gt: 5 })
        ));
        assert!(matches!(vo_metrics(&gt, &gt, &[]), Err(MetricsError::InvalidConfig(_))));
        assert!(matches!(vo_metrics(&gt, &gt, &[-1.0]), Err(MetricsError::InvalidConfig(_))));
    }

    #[test]
    fn errors_are_invariant_to_a_global_rigid_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let gt_poses = make_trajectory(
            &TrajectoryKind::Sinusoid { amplitude: 0.5, wavelength: 6.0 },
            10.0,
            11,
            &SpeedProfile::Uniform,
        )
        .unwrap();
        // Estimate = ground truth with a small deterministic wobble.
        let est_poses: Vec<Pose> = gt_poses
            .iter()
            .enumerate()
            .map(|(k, p)| {
                Pose::new(
                    p.angle_axis() + Vector3::new(0.0, 1e-3 * (k as f64).sin(), 0.0),
                    p.translation() * (1.0 + 0.01 * (k as f64 % 3.0)),
                )
            })
            .collect();
        let base = vo_metrics(
            &Trajectory::from_world_poses(est_poses.clone()).unwrap(),
            &Trajectory::from_world_poses(gt_poses.clone()).unwrap(),
            &[4.0],
        )
        .unwrap();
        let g = Pose::new(
            Vector3::new(
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.4..0.4),
                rng.random_range(-0.4..0.4),
            ),
            Vector3::new(
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            ),
        );
        // A world re-expression right-composes every absolute pose with G.
        let moved = |poses: &[Pose]| -> Trajectory {
            Trajectory::from_world_poses(poses.iter().map(|p| p.compose(&g)).collect()).unwrap()
        };
        let shifted = vo_metrics(&moved(&est_poses), &moved(&gt_poses), &[4.0]).unwrap();
        assert!((base.t_err_percent - shifted.t_err_percent).abs() < 1e-9);
        assert!((base.r_err_deg_per_100m - shifted.r_err_deg_per_100m).abs() < 1e-9);
    }

    #[test]
    fn report_carries_aggregates_and_series() {
        let gt = straight(6);
        let m = vo_metrics(&gt, &gt, &[2.0]).unwrap();
        let report = m.report().unwrap();
        assert_eq!(report.scalars["t_err_percent"], 0.0);
        assert_eq!(report.series["segment_t_err_percent"].len(), m.segments.len());
    }
}
