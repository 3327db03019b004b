use serde::{Deserialize, Serialize};

use super::buffer::apply_mask_impl;
use super::warp::warp_by_homography_with_coords;
use super::{
    check_same_size, image_gradients_luma, ssim::ssim_from_stats, ssim::ssim_stats,
    DepthMap, ImageBuffer, ImagingError, RoadMask, WarpResult,
};
use crate::geometry::Homography;

/// Which per-pixel quantity the smoothness term regularizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothnessTarget {
    /// Mean-normalized inverse depth (the default).
    #[default]
    InverseDepth,
    /// Mean-normalized depth.
    Depth,
}

/// Warped-mask samples below `1 - MASK_STRICT_EPS` are treated as touching
/// non-road pixels and excluded.
pub(crate) const MASK_STRICT_EPS: f64 = 1e-9;

/// Robust photometric error between the target image and a reconstruction:
/// mean over valid pixels of `alpha * (1 - SSIM)/2 + (1 - alpha) * |diff|`.
///
/// SSIM runs on channel-mean intensities; the L1 term averages channels.
pub fn photometric_loss(
    target: &ImageBuffer,
    recon: &WarpResult,
    alpha: f64,
) -> Result<f64, ImagingError> {
    check_same_size(
        target.width(),
        target.height(),
        recon.image.width(),
        recon.image.height(),
    )?;
    if !(0.0..=1.0).contains(&alpha) {
        return Err(ImagingError::InvalidWeight(format!(
            "alpha must be in [0,1], got {alpha}"
        )));
    }
    let (w, h, ch) = (target.width(), target.height(), target.channels());
    if ch != recon.image.channels() {
        return Err(ImagingError::InvalidBuffer("channel count mismatch".into()));
    }
    let la = target.luma();
    let lb = recon.image.luma();
    let stats = ssim_stats(la.data(), lb.data(), w, h);
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..w * h {
        if !recon.validity[i] {
            continue;
        }
        let ssim = ssim_from_stats(&stats, i);
        let mut l1 = 0.0;
        for c in 0..ch {
            l1 += (target.data()[i * ch + c] - recon.image.data()[i * ch + c]).abs();
        }
        l1 /= ch as f64;
        sum += alpha * (1.0 - ssim) * 0.5 + (1.0 - alpha) * l1;
        count += 1;
    }
    if count == 0 {
        return Err(ImagingError::EmptyValiditySet);
    }
    Ok(sum / count as f64)
}

/// Mean-normalized per-pixel field the smoothness term regularizes.
fn smoothness_field(
    depth: &DepthMap,
    target: SmoothnessTarget,
) -> Result<Vec<f64>, ImagingError> {
    let n = depth.width() * depth.height();
    let mut field = vec![0.0; n];
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..n {
        if !depth.validity()[i] {
            continue;
        }
        let d = depth.depths()[i];
        let v = match target {
            SmoothnessTarget::InverseDepth => 1.0 / d,
            SmoothnessTarget::Depth => d,
        };
        field[i] = v;
        sum += v;
        count += 1;
    }
    if count == 0 {
        return Err(ImagingError::DegenerateDepth);
    }
    let mean = sum / count as f64;
    for v in &mut field {
        *v /= mean;
    }
    Ok(field)
}

/// Edge-aware smoothness of the mean-normalized (inverse) depth:
/// mean over interior pixels of
/// `|dx d*| e^{-|dx I|} + |dy d*| e^{-|dy I|}` with forward differences.
///
/// A pixel contributes only when it and both forward neighbors carry valid
/// depth; the last row and column are excluded. Scale-invariant in the
/// depth by construction.
pub fn smoothness_loss(
    depth: &DepthMap,
    img: &ImageBuffer,
    target: SmoothnessTarget,
) -> Result<f64, ImagingError> {
    check_same_size(depth.width(), depth.height(), img.width(), img.height())?;
    let (w, h) = (depth.width(), depth.height());
    if w < 2 || h < 2 {
        return Err(ImagingError::InvalidBuffer(
            "smoothness needs at least 2x2 pixels".into(),
        ));
    }
    let field = smoothness_field(depth, target)?;
    let grads = image_gradients_luma(img);
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in 0..h - 1 {
        for x in 0..w - 1 {
            let i = y * w + x;
            if !(depth.validity()[i]
                && depth.validity()[i + 1]
                && depth.validity()[i + w])
            {
                continue;
            }
            let ddx = field[i + 1] - field[i];
            let ddy = field[i + w] - field[i];
            sum += ddx.abs() * (-grads.dx_at(x, y, 0).abs()).exp()
                + ddy.abs() * (-grads.dy_at(x, y, 0).abs()).exp();
            count += 1;
        }
    }
    if count == 0 {
        return Err(ImagingError::DegenerateDepth);
    }
    Ok(sum / count as f64)
}

/// Zeroes the image outside the mask.
pub fn apply_mask(img: &ImageBuffer, mask: &RoadMask) -> Result<ImageBuffer, ImagingError> {
    apply_mask_impl(img, mask)
}

/// Road-region alignment error: warps the masked previous image (and the
/// mask itself) by `H` and takes the mean L1 against the current image over
/// pixels that are valid under the warp, inside the current road mask, and
/// whose bilinear footprint lies fully inside the previous road mask.
pub fn homography_loss(
    current: &ImageBuffer,
    previous: &ImageBuffer,
    h: &Homography,
    mask_current: &RoadMask,
    mask_previous: &RoadMask,
) -> Result<f64, ImagingError> {
    check_same_size(current.width(), current.height(), previous.width(), previous.height())?;
    check_same_size(
        current.width(),
        current.height(),
        mask_current.width(),
        mask_current.height(),
    )?;
    check_same_size(
        previous.width(),
        previous.height(),
        mask_previous.width(),
        mask_previous.height(),
    )?;
    if current.channels() != previous.channels() {
        return Err(ImagingError::InvalidBuffer("channel count mismatch".into()));
    }
    let masked_prev = apply_mask(previous, mask_previous)?;
    let (warped, _) = warp_by_homography_with_coords(&masked_prev, h);
    let warped_mask = super::warp::warp_by_homography(&mask_previous.to_image(), h);
    let (w, ht, ch) = (current.width(), current.height(), current.channels());
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in 0..ht {
        for x in 0..w {
            let i = y * w + x;
            if !(warped.validity[i]
                && warped_mask.validity[i]
                && mask_current.get(x, y)
                && warped_mask.image.data()[i] >= 1.0 - MASK_STRICT_EPS)
            {
                continue;
            }
            let mut l1 = 0.0;
            for c in 0..ch {
                l1 += (warped.image.data()[i * ch + c] - current.data()[i * ch + c]).abs();
            }
            sum += l1 / ch as f64;
            count += 1;
        }
    }
    if count == 0 {
        return Err(ImagingError::EmptyMaskIntersection);
    }
    Ok(sum / count as f64)
}
