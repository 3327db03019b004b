//! Joint per-pair estimation of ego-motion, ground plane, and a coarse
//! depth grid by direct minimization of the photometric + smoothness +
//! road-homography objective, with camera-height scale recovery.
//!
//! The state of one image pair is a [`StateVector`]: a 6-dof pose
//! (angle-axis + translation, mapping current-frame points into the
//! previous frame), a 3-dof ground-plane correction, and a coarse
//! log-inverse-depth grid that upsamples bilinearly to a full
//! [`DepthMap`](crate::imaging::DepthMap). Every loss evaluation first
//! recovers metric scale from the calibrated camera height: the corrected
//! plane implies a height `h_t`, and depth and translation are multiplied
//! by `s = h_c / h_t` ([`scale_adjust`]) before the photometric, smoothness
//! and homography terms are computed.
//!
//! [`estimate_pair`] minimizes [`total_loss`] coarse-to-fine over an image
//! pyramid with momentum gradient descent and a backtracking step schedule
//! (accepted iterates never increase the loss). Gradients are analytic:
//! through the plane-induced homography via
//! [`homography_jacobians`](crate::geometry::homography_jacobians), and
//! through the depth warp via sampled image gradients chained with the
//! exact reprojection Jacobian. [`estimate_sequence`] chains pairwise
//! results into an absolute trajectory, warm-starting each pair from the
//! previous solution. All of it is deterministic: same inputs and config
//! give bit-identical results.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::GeometryError;
use crate::imaging::{ImagingError, SmoothnessTarget};

mod gradient;
mod loss;
mod optimize;
mod scale;
mod state;

pub use gradient::total_loss_gradient;
pub use loss::{total_loss, RoadMasks};
pub use optimize::{
    estimate_pair, estimate_pair_with_init, estimate_sequence, EstimationReport,
    EstimationResult, SequenceResult, TraceRow,
};
pub use scale::scale_adjust;
pub use state::StateVector;

pub(crate) use loss::{context_loss, LevelContext};

/// Road-mask coverage (fraction of pixels) below which the homography term
/// is dropped and the result flagged: with almost no visible road the term
/// is degenerate.
pub const MIN_ROAD_COVERAGE: f64 = 0.01;

/// Errors raised by the estimation operations.
#[derive(Debug, Error)]
pub enum EstimationError {
    #[error("invalid estimator config: {0}")]
    InvalidConfig(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("a sequence needs at least 2 frames, got {frames}")]
    SequenceTooShort { frames: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Imaging(#[from] ImagingError),
}

/// Per-block multipliers on the descent direction, letting parameter groups
/// with different units move at different rates under one shared step size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepScales {
    /// Pose rotation (angle-axis, radians).
    pub rotation: f64,
    /// Pose translation (meters).
    pub translation: f64,
    /// Plane-normal correction angles (radians).
    pub plane_rotation: f64,
    /// Plane height offset (meters).
    pub plane_height: f64,
    /// Log-inverse-depth grid nodes.
    pub grid: f64,
}

impl Default for StepScales {
    fn default() -> Self {
        Self {
            rotation: 1.0,
            translation: 1.0,
            plane_rotation: 1.0,
            plane_height: 1.0,
            grid: 1.0,
        }
    }
}

/// Weights, schedule, and problem geometry for [`estimate_pair`].
///
/// The loss is `E = mu * E_p + lambda * E_s + xi * E_h` with SSIM/L1 mix
/// `alpha` inside `E_p`. `camera_height` is the calibrated mounting height
/// `h_c` used for scale recovery. Optimization runs coarse-to-fine over
/// `pyramid_levels` levels (downscale factor 2), each level capped at
/// `max_iterations` momentum-descent iterations with backtracking: a step
/// that does not decrease the loss is rejected, the step size multiplied by
/// `step_decay` and the momentum reset; accepted steps grow the step size
/// slightly. A level stops early once accepted decreases stay below
/// `convergence_tol` (relative).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// Photometric weight.
    pub mu: f64,
    /// Smoothness weight.
    pub lambda: f64,
    /// Homography weight.
    pub xi: f64,
    /// SSIM share of the photometric term, in `[0, 1]`.
    pub alpha: f64,
    /// Pyramid levels (>= 1); level sizes shrink by 2 per level.
    pub pyramid_levels: usize,
    /// Iteration cap per pyramid level.
    pub max_iterations: usize,
    /// Initial descent step size.
    pub initial_step: f64,
    /// Multiplier applied to the step size on a rejected step, in (0, 1).
    pub step_decay: f64,
    /// Heavy-ball momentum coefficient, in [0, 1).
    pub momentum: f64,
    /// A level converges after two consecutive accepted decreases below
    /// this fraction of the current loss.
    pub convergence_tol: f64,
    /// Depth-grid control points along x (>= 2).
    pub grid_width: usize,
    /// Depth-grid control points along y (>= 2).
    pub grid_height: usize,
    /// Calibrated camera height `h_c` above the road, meters (> 0).
    pub camera_height: f64,
    /// Which per-pixel quantity the smoothness term regularizes.
    pub smoothness_target: SmoothnessTarget,
    /// Optional weight of an extra `|h_t - h_c|` penalty pinning the
    /// estimated camera height to the calibrated one. Off by default: the
    /// calibrated height already enters through scale recovery, so the
    /// penalty only removes the (harmless) gauge freedom between the height
    /// offset and the translation scale.
    pub height_penalty: Option<f64>,
    /// Warm-start each pair of a sequence from the previous solution.
    pub warm_start: bool,
    /// Depth prior for grid nodes above the plane horizon, meters.
    pub far_depth: f64,
    /// Seed for the jitter applied to far-depth grid nodes at init.
    pub rng_seed: u64,
    /// Per-block multipliers on the descent direction.
    pub step_scales: StepScales,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            mu: 1.0,
            lambda: 0.001,
            xi: 0.1,
            alpha: 0.85,
            pyramid_levels: 3,
            max_iterations: 200,
            initial_step: 1e-3,
            step_decay: 0.5,
            momentum: 0.85,
            convergence_tol: 1e-8,
            grid_width: 16,
            grid_height: 12,
            camera_height: 1.5,
            smoothness_target: SmoothnessTarget::InverseDepth,
            height_penalty: None,
            warm_start: true,
            far_depth: 50.0,
            rng_seed: 0,
            step_scales: StepScales::default(),
        }
    }
}

impl EstimatorConfig {
    /// Default config at a given calibrated camera height.
    pub fn new(camera_height: f64) -> Self {
        Self { camera_height, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), EstimationError> {
        let bad = |msg: String| Err(EstimationError::InvalidConfig(msg));
        for (name, v) in [("mu", self.mu), ("lambda", self.lambda), ("xi", self.xi)] {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must be in [0, 1], got {}", self.alpha));
        }
        if self.pyramid_levels == 0 {
            return bad("pyramid_levels must be >= 1".into());
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be >= 1".into());
        }
        if !(self.initial_step > 0.0 && self.initial_step.is_finite()) {
            return bad(format!("initial_step must be positive, got {}", self.initial_step));
        }
        if !(self.step_decay > 0.0 && self.step_decay < 1.0) {
            return bad(format!("step_decay must be in (0, 1), got {}", self.step_decay));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must be in [0, 1), got {}", self.momentum));
        }
        if !(self.convergence_tol >= 0.0 && self.convergence_tol.is_finite()) {
            return bad(format!(
                "convergence_tol must be finite and >= 0, got {}",
                self.convergence_tol
            ));
        }
        if self.grid_width < 2 || self.grid_height < 2 {
            return bad(format!(
                "depth grid must be at least 2x2, got {}x{}",
                self.grid_width, self.grid_height
            ));
        }
        if !(self.camera_height > 0.0 && self.camera_height.is_finite()) {
            return bad(format!(
                "camera_height must be positive and finite, got {}",
                self.camera_height
            ));
        }
        if !(self.far_depth > 0.0 && self.far_depth.is_finite()) {
            return bad(format!("far_depth must be positive, got {}", self.far_depth));
        }
        if let Some(w) = self.height_penalty {
            if !(w >= 0.0) || !w.is_finite() {
                return bad(format!("height_penalty must be finite and >= 0, got {w}"));
            }
        }
        let s = &self.step_scales;
        for (name, v) in [
            ("rotation", s.rotation),
            ("translation", s.translation),
            ("plane_rotation", s.plane_rotation),
            ("plane_height", s.plane_height),
            ("grid", s.grid),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("step_scales.{name} must be positive, got {v}"));
            }
        }
        Ok(())
    }
}

/// The loss terms of one evaluation. `homography` is `None` when the term is
/// inactive (zero weight, missing masks, or dropped for insufficient road
/// coverage); `height_penalty` is `None` unless the optional penalty is
/// configured. `total` is the weighted sum of the active terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub photometric: f64,
    pub smoothness: f64,
    pub homography: Option<f64>,
    pub height_penalty: Option<f64>,
    pub total: f64,
}

/// Sign with a zero subgradient at ties, matching the symmetric central
/// finite difference of `|x|` at 0.
#[inline]
pub(crate) fn sgn(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_matches_reference_weights() {
        let cfg = EstimatorConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.mu, 1.0);
        assert_eq!(cfg.lambda, 0.001);
        assert_eq!(cfg.xi, 0.1);
        assert_eq!(cfg.alpha, 0.85);
        assert_eq!(cfg.pyramid_levels, 3);
        assert_eq!((cfg.grid_width, cfg.grid_height), (16, 12));
        assert!(cfg.height_penalty.is_none());
    }

    #[test]
    fn config_validation_rejects_bad_fields() {
        let ok = EstimatorConfig::default();
        let cases: Vec<EstimatorConfig> = vec![
            EstimatorConfig { mu: -1.0, ..ok.clone() },
            EstimatorConfig { lambda: f64::NAN, ..ok.clone() },
            EstimatorConfig { alpha: 1.5, ..ok.clone() },
            EstimatorConfig { pyramid_levels: 0, ..ok.clone() },
            EstimatorConfig { max_iterations: 0, ..ok.clone() },
            EstimatorConfig { initial_step: 0.0, ..ok.clone() },
            EstimatorConfig { step_decay: 1.0, ..ok.clone() },
            EstimatorConfig { momentum: 1.0, ..ok.clone() },
            EstimatorConfig { grid_width: 1, ..ok.clone() },
            EstimatorConfig { camera_height: 0.0, ..ok.clone() },
            EstimatorConfig { far_depth: -3.0, ..ok.clone() },
            EstimatorConfig { height_penalty: Some(-0.1), ..ok.clone() },
            EstimatorConfig {
                step_scales: StepScales { grid: 0.0, ..StepScales::default() },
                ..ok.clone()
            },
        ];
        for (i, cfg) in cases.iter().enumerate() {
            assert!(cfg.validate().is_err(), "case {i} should be rejected");
        }
        ok.validate().unwrap();
    }

    #[test]
    fn config_serde_round_trips_and_fills_defaults() {
        let cfg = EstimatorConfig { xi: 0.0, rng_seed: 7, ..EstimatorConfig::new(1.65) };
        let text = serde_json::to_string(&cfg).unwrap();
        let back: EstimatorConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        // Partial configs pick up defaults for missing fields.
        let partial: EstimatorConfig =
            serde_json::from_str(r#"{"camera_height": 2.0, "xi": 0.25}"#).unwrap();
        assert_eq!(partial.camera_height, 2.0);
        assert_eq!(partial.xi, 0.25);
        assert_eq!(partial.mu, 1.0);
        assert_eq!(partial.grid_height, 12);
    }

    #[test]
    fn sgn_has_zero_subgradient_at_ties() {
        assert_eq!(sgn(3.2), 1.0);
        assert_eq!(sgn(-0.5), -1.0);
        assert_eq!(sgn(0.0), 0.0);
        assert_eq!(sgn(-0.0), 0.0);
    }
}
