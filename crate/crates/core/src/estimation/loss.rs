//! Forward evaluation of the joint pair objective.

use crate::geometry::{compose_homography, CameraIntrinsics};
use crate::imaging::{
    homography_loss, photometric_loss, smoothness_loss, warp_by_depth, ImageBuffer, RoadMask,
};

use super::state::StateVector;
use super::{EstimationError, EstimatorConfig, LossBreakdown};

/// Road masks of an image pair, named to keep frame order unambiguous.
#[derive(Debug, Clone, Copy)]
pub struct RoadMasks<'a> {
    pub previous: &'a RoadMask,
    pub current: &'a RoadMask,
}

/// One resolution level of a pair: images, matching intrinsics, and masks
/// when the homography term is active at this level (`None` disables it).
pub(crate) struct LevelContext<'a> {
    pub current: &'a ImageBuffer,
    pub previous: &'a ImageBuffer,
    pub k: &'a CameraIntrinsics,
    pub masks: Option<RoadMasks<'a>>,
}

/// Evaluates the objective at a state.
///
/// The state is decoded with camera-height scale recovery first, so every
/// term sees the rescaled depth, translation, and the plane pinned at the
/// calibrated height. The photometric and smoothness terms are always
/// computed (even at zero weight — their failure modes stay visible); the
/// homography term only when masks are present in the context. Breakdown
/// fields hold unweighted term values; `total` applies the weights.
pub(crate) fn context_loss(
    state: &StateVector,
    ctx: &LevelContext<'_>,
    cfg: &EstimatorConfig,
) -> Result<LossBreakdown, EstimationError> {
    let (w, h) = (ctx.current.width(), ctx.current.height());
    let decoded = state.decode(w, h, cfg.camera_height)?;

    let recon =
        warp_by_depth(ctx.previous, ctx.k, &decoded.pose_adjusted, &decoded.depth_adjusted)?;
    let photometric = photometric_loss(ctx.current, &recon, cfg.alpha)?;
    let smoothness =
        smoothness_loss(&decoded.depth_adjusted, ctx.current, cfg.smoothness_target)?;
    let homography = match &ctx.masks {
        Some(masks) => {
            let hom =
                compose_homography(ctx.k, &decoded.pose_adjusted, &decoded.plane_adjusted)?;
            Some(homography_loss(ctx.current, ctx.previous, &hom, masks.current, masks.previous)?)
        }
        None => None,
    };
    let height_penalty =
        cfg.height_penalty.map(|_| (decoded.height_raw - cfg.camera_height).abs());

    let mut total = cfg.mu * photometric + cfg.lambda * smoothness;
    if let Some(value) = homography {
        total += cfg.xi * value;
    }
    if let (Some(weight), Some(value)) = (cfg.height_penalty, height_penalty) {
        total += weight * value;
    }
    Ok(LossBreakdown { photometric, smoothness, homography, height_penalty, total })
}

/// Evaluates the full objective of a pair at a state:
/// `mu * E_photometric + lambda * E_smoothness + xi * E_homography`
/// (plus the optional height penalty), with camera-height scale recovery
/// applied inside the evaluation.
///
/// The homography term needs both road masks and a positive `xi`; with
/// `xi == 0` the masks are never read. This function applies no
/// road-coverage policy — masks that leave no usable road pixels surface
/// as an error ([`estimate_pair`](super::estimate_pair) is the layer that
/// drops the term and flags the result instead).
pub fn total_loss(
    state: &StateVector,
    current: &ImageBuffer,
    previous: &ImageBuffer,
    masks: Option<RoadMasks<'_>>,
    k: &CameraIntrinsics,
    cfg: &EstimatorConfig,
) -> Result<LossBreakdown, EstimationError> {
    cfg.validate()?;
    let ctx = pair_context(current, previous, masks, k, cfg)?;
    context_loss(state, &ctx, cfg)
}

/// Validates pair dimensions and builds the evaluation context, dropping
/// the masks when the homography weight is zero.
pub(crate) fn pair_context<'a>(
    current: &'a ImageBuffer,
    previous: &'a ImageBuffer,
    masks: Option<RoadMasks<'a>>,
    k: &'a CameraIntrinsics,
    cfg: &EstimatorConfig,
) -> Result<LevelContext<'a>, EstimationError> {
    let (w, h) = (current.width(), current.height());
    if previous.width() != w || previous.height() != h {
        return Err(EstimationError::DimensionMismatch(format!(
            "frames differ: {w}x{h} vs {}x{}",
            previous.width(),
            previous.height()
        )));
    }
    if k.width != w || k.height != h {
        return Err(EstimationError::DimensionMismatch(format!(
            "intrinsics are {}x{}, frames are {w}x{h}",
            k.width, k.height
        )));
    }
    if let Some(m) = &masks {
        for (name, mask) in [("previous", m.previous), ("current", m.current)] {
            if mask.width() != w || mask.height() != h {
                return Err(EstimationError::DimensionMismatch(format!(
                    "{name} road mask is {}x{}, frames are {w}x{h}",
                    mask.width(),
                    mask.height()
                )));
            }
        }
    }
    Ok(LevelContext {
        current,
        previous,
        k,
        masks: if cfg.xi > 0.0 { masks } else { None },
    })
}
