//! Robust geometric fitting: RANSAC plane estimation on back-projected
//! depth, normalized-DLT homography estimation from point correspondences,
//! and reprojection-error statistics.
//!
//! All RANSAC runs are deterministic given the seed: the hypothesis RNG for
//! iteration `i` is an independent stream derived from `(seed, i)`, so
//! results do not depend on evaluation order or worker count.

mod homography;
mod plane;
mod ransac;
mod reproj;

pub use homography::{dlt_homography, ransac_homography, symmetric_transfer_error};
pub use plane::{depth_to_points, fit_plane_lsq, plane_from_three, ransac_plane};
pub use reproj::{reprojection_error, ReprojectionStats};

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

/// Errors raised by fitting operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("need at least {needed} items, got {got}")]
    TooFewItems { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("no consensus set of at least {needed} inliers found")]
    NoConsensus { needed: usize },
    #[error("non-finite coordinates in input")]
    NonFinite,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// 3D points in a camera frame, optionally carrying the pixel each point
/// was back-projected from.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
    pixels: Option<Vec<Vector2<f64>>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self, FitError> {
        if points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(FitError::NonFinite);
        }
        Ok(Self { points, pixels: None })
    }

    pub fn with_pixels(
        points: Vec<Vector3<f64>>,
        pixels: Vec<Vector2<f64>>,
    ) -> Result<Self, FitError> {
        if points.len() != pixels.len() {
            return Err(FitError::InvalidConfig(
                "pixel provenance length differs from point count".into(),
            ));
        }
        let mut cloud = Self::new(points)?;
        if pixels.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(FitError::NonFinite);
        }
        cloud.pixels = Some(pixels);
        Ok(cloud)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn pixels(&self) -> Option<&[Vector2<f64>]> {
        self.pixels.as_deref()
    }
}

/// One pixel match: `current` in frame t, `previous` in frame t-1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub current: Vector2<f64>,
    pub previous: Vector2<f64>,
}

/// Matched pixel pairs between consecutive frames.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrespondenceSet {
    pairs: Vec<Correspondence>,
}

impl CorrespondenceSet {
    pub fn new(pairs: Vec<Correspondence>) -> Result<Self, FitError> {
        let finite = pairs.iter().all(|c| {
            c.current.iter().all(|v| v.is_finite()) && c.previous.iter().all(|v| v.is_finite())
        });
        if !finite {
            return Err(FitError::NonFinite);
        }
        Ok(Self { pairs })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[Correspondence] {
        &self.pairs
    }
}

/// RANSAC parameters. The threshold unit follows the model being fitted:
/// meters for planes, pixels for homographies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RansacConfig {
    pub inlier_threshold: f64,
    pub max_iterations: usize,
    /// Target probability of sampling at least one all-inlier hypothesis.
    pub confidence: f64,
    pub rng_seed: u64,
}

impl RansacConfig {
    /// Plane-fitting defaults (5 cm perpendicular distance).
    pub fn plane_default(rng_seed: u64) -> Self {
        Self { inlier_threshold: 0.05, max_iterations: 2000, confidence: 0.999, rng_seed }
    }

    /// Homography defaults (0.5 px symmetric transfer error).
    pub fn homography_default(rng_seed: u64) -> Self {
        Self { inlier_threshold: 0.5, max_iterations: 2000, confidence: 0.999, rng_seed }
    }

    pub fn validate(&self) -> Result<(), FitError> {
        if !(self.inlier_threshold > 0.0 && self.inlier_threshold.is_finite()) {
            return Err(FitError::InvalidConfig(format!(
                "inlier threshold must be positive, got {}",
                self.inlier_threshold
            )));
        }
        if self.max_iterations == 0 {
            return Err(FitError::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(FitError::InvalidConfig(format!(
                "confidence must lie in (0, 1), got {}",
                self.confidence
            )));
        }
        Ok(())
    }
}

/// Robust-fit outcome: the refit model, its consensus set, and how hard
/// RANSAC had to work. `inlier_ratio` lets callers apply quality gates
/// (e.g. discarding frames with ratio < 0.6).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport<M> {
    pub model: M,
    pub inliers: Vec<usize>,
    pub inlier_ratio: f64,
    pub iterations: usize,
}

impl<M> FitReport<M> {
    pub fn inlier_count(&self) -> usize {
        self.inliers.len()
    }
}
