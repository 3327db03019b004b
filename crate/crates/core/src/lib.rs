//! Road-aware structure from motion.
//!
//! The crate estimates frame-to-frame camera motion, the ground-plane
//! parameters, and a dense depth field for a forward-facing camera, using the
//! plane-induced homography of the road surface as an extra geometric
//! constraint on top of a direct photometric objective.

pub mod estimation;
pub mod fitting;
pub mod geometry;
pub mod imaging;
pub mod io;
pub mod metrics;
pub mod synthscene;

pub use estimation::{
    estimate_pair, estimate_pair_with_init, estimate_sequence, scale_adjust, total_loss,
    total_loss_gradient, EstimationError, EstimationReport, EstimationResult, EstimatorConfig,
    LossBreakdown, RoadMasks, SequenceResult, StateVector, StepScales, TraceRow,
    MIN_ROAD_COVERAGE,
};
pub use fitting::{Correspondence, CorrespondenceSet, FitReport, PointCloud, RansacConfig};
pub use imaging::{DepthMap, ImageBuffer, RoadMask, WarpResult};

pub use geometry::{
    CameraIntrinsics, GroundPlane, Homography, HomographyJacobians, PlaneCorrection, Pose,
};

pub use metrics::{
    depth_metrics, homography_eval, normal_angle_error, vo_metrics, DepthEvalConfig, DepthMetrics,
    DepthScaling, HomographyEvalReport, MetricReport, MetricsError, Trajectory, VoMetrics,
    VoSegment,
};
