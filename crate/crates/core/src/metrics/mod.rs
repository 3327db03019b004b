//! Evaluation suite: visual-odometry segment errors, depth-map error and
//! accuracy metrics with selectable scale recovery, ground-normal angle
//! error, and homography reprojection reports.
//!
//! All metrics are non-negative and vanish exactly on perfect inputs; every
//! value placed in a [`MetricReport`] is finite.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fitting::FitError;
use crate::geometry::{GroundPlane, Pose};

mod depth;
mod homog;
mod vo;

pub use depth::{depth_metrics, DepthEvalConfig, DepthMetrics, DepthScaling};
pub use homog::{homography_eval, HomographyEvalReport};
pub use vo::{vo_metrics, VoMetrics, VoSegment};

/// Errors produced by the evaluation operations.
#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("trajectory needs at least one pose")]
    EmptyTrajectory,
    #[error("trajectory length mismatch: estimated {est} vs ground truth {gt}")]
    LengthMismatch { est: usize, gt: usize },
    #[error(
        "no segment length fits: ground-truth path is {path_length:.3} m, \
         requested lengths {requested:?} m"
    )]
    NoUsableSegments { path_length: f64, requested: Vec<f64> },
    #[error("no jointly valid pixels remain after masking and depth clamping")]
    EmptyValidSet,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite metric value: {0}")]
    NonFinite(String),
    #[error(transparent)]
    Fitting(#[from] FitError),
}

/// Ordered absolute world-to-camera poses; the frame index equals the
/// position in the list. [`Trajectory::from_world_poses`] additionally
/// canonicalizes so the first pose is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    poses: Vec<Pose>,
}

impl Trajectory {
    /// Wraps a pose list exactly as given, without anchoring. Loaders use
    /// this so a save/load round trip reproduces the file verbatim.
    pub fn from_poses(poses: Vec<Pose>) -> Result<Self, MetricsError> {
        if poses.is_empty() {
            return Err(MetricsError::EmptyTrajectory);
        }
        Ok(Self { poses })
    }

    /// Canonicalizes a pose list by right-composing with the inverse of the
    /// first pose, so relative motion is preserved and `poses[0]` becomes
    /// the identity.
    pub fn from_world_poses(poses: Vec<Pose>) -> Result<Self, MetricsError> {
        if poses.is_empty() {
            return Err(MetricsError::EmptyTrajectory);
        }
        let anchor = poses[0].inverse();
        let poses = poses.iter().map(|p| p.compose(&anchor)).collect();
        Ok(Self { poses })
    }

    pub fn poses(&self) -> &[Pose] {
        &self.poses
    }

    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }

    /// Camera centers in the canonicalized world frame.
    pub fn centers(&self) -> Vec<nalgebra::Vector3<f64>> {
        self.poses.iter().map(|p| p.inverse().translation()).collect()
    }

    /// Cumulative arc length along the camera centers; `arc[0] = 0`.
    pub fn arc_lengths(&self) -> Vec<f64> {
        let centers = self.centers();
        let mut arc = Vec::with_capacity(centers.len());
        let mut total = 0.0;
        arc.push(0.0);
        for pair in centers.windows(2) {
            total += (pair[1] - pair[0]).norm();
            arc.push(total);
        }
        arc
    }

    /// Total path length in meters.
    pub fn path_length(&self) -> f64 {
        self.arc_lengths().last().copied().unwrap_or(0.0)
    }
}

/// Angle between two plane normals in degrees, insensitive to normal sign.
pub fn normal_angle_error(pred: &GroundPlane, gt: &GroundPlane) -> f64 {
    let dot = pred.normal().dot(&gt.normal()).abs().clamp(0.0, 1.0);
    dot.acos().to_degrees()
}

/// Uniform serializable container for metric outputs: named finite scalars
/// plus optional per-item series (used for CSV export and plotting).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub name: String,
    pub scalars: BTreeMap<String, f64>,
    pub series: BTreeMap<String, Vec<f64>>,
}

impl MetricReport {
    pub fn new(name: &str) -> Self {
        Self { name: name.to_string(), scalars: BTreeMap::new(), series: BTreeMap::new() }
    }

    /// Inserts a scalar, rejecting non-finite values.
    pub fn put(&mut self, key: &str, value: f64) -> Result<(), MetricsError> {
        if !value.is_finite() {
            return Err(MetricsError::NonFinite(format!("{key} = {value}")));
        }
        self.scalars.insert(key.to_string(), value);
        Ok(())
    }

    /// Inserts a series, rejecting non-finite entries.
    pub fn put_series(&mut self, key: &str, values: Vec<f64>) -> Result<(), MetricsError> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(MetricsError::NonFinite(format!("{key} contains {bad}")));
        }
        self.series.insert(key.to_string(), values);
        Ok(())
    }
}

/// Midpoint-interpolated median of an unsorted non-empty slice.
pub(crate) fn median(values: &[f64]) -> f64 {
    debug_assert!(!values.is_empty());
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}
