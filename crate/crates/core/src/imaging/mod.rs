//! Dense image operations: buffers, bilinear sampling, depth- and
//! homography-driven view synthesis, SSIM, and the per-pixel loss terms.
//!
//! All intensities live in `[0, 1]`. Reductions run in fixed row-major order
//! so results are bit-reproducible.

mod buffer;
mod loss;
mod sampling;
mod ssim;
mod warp;

pub use buffer::{DepthMap, ImageBuffer, ImageGradients, RoadMask, ScalarField, WarpResult};
pub use loss::{
    apply_mask, homography_loss, photometric_loss, smoothness_loss, SmoothnessTarget,
};
pub use sampling::{bilinear_sample, bilinear_sample_with_grad};
pub use ssim::{ssim_map, SSIM_C1, SSIM_C2};
pub use warp::{warp_by_depth, warp_by_depth_with_coords, warp_by_homography};

pub use buffer::image_gradients;
pub use warp::warp_by_homography_with_coords;

pub(crate) use buffer::image_gradients_luma;
pub(crate) use loss::MASK_STRICT_EPS;
pub(crate) use ssim::{box3_adjoint, ssim_stats};

/// Errors raised by image operations.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ImagingError {
    #[error("invalid buffer: {0}")]
    InvalidBuffer(String),
    #[error("dimension mismatch: expected {expected_width}x{expected_height}, got {width}x{height}")]
    DimensionMismatch {
        expected_width: usize,
        expected_height: usize,
        width: usize,
        height: usize,
    },
    #[error("no valid pixels to average over")]
    EmptyValiditySet,
    #[error("masks do not overlap after warping")]
    EmptyMaskIntersection,
    #[error("depth map has no usable pixels")]
    DegenerateDepth,
    #[error("invalid loss weight: {0}")]
    InvalidWeight(String),
}

pub(crate) fn check_same_size(
    aw: usize,
    ah: usize,
    bw: usize,
    bh: usize,
) -> Result<(), ImagingError> {
    if aw != bw || ah != bh {
        return Err(ImagingError::DimensionMismatch {
            expected_width: aw,
            expected_height: ah,
            width: bw,
            height: bh,
        });
    }
    Ok(())
}
