use nalgebra::Vector2;

use super::{
    bilinear_sample, check_same_size, DepthMap, ImageBuffer, ImagingError, WarpResult,
};
use crate::geometry::{reproject_pixel, CameraIntrinsics, Homography, Pose};

/// Samples `src` at `coords` (one entry per target pixel, `None` = invalid)
/// into a fresh warp result. Invalid pixels get intensity 0.
fn sample_at_coords(src: &ImageBuffer, coords: &[Option<Vector2<f64>>]) -> WarpResult {
    let (w, h, ch) = (src.width(), src.height(), src.channels());
    let mut data = vec![0.0; w * h * ch];
    let mut validity = vec![false; w * h];
    for (i, coord) in coords.iter().enumerate() {
        let Some(q) = coord else { continue };
        let mut ok = true;
        let mut values = [0.0; 3];
        for (c, slot) in values.iter_mut().enumerate().take(ch) {
            match bilinear_sample(src, q.x, q.y, c) {
                // A convex combination of unit-range values can overshoot
                // the range by an ulp in floating point; clamp it back.
                Some(v) => *slot = v.clamp(0.0, 1.0),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            validity[i] = true;
            data[i * ch..i * ch + ch].copy_from_slice(&values[..ch]);
        }
    }
    WarpResult {
        image: ImageBuffer::from_vec(w, h, ch, data).expect("sampled values stay in range"),
        validity,
    }
}

/// Reconstructs the target view from `src` (the other frame) by
/// reprojecting every target pixel through `pose` at the target's `depth`.
///
/// Validity combines depth validity, in-front-of-camera and in-bounds
/// sampling. The warped image has the dimensions of `depth`.
pub fn warp_by_depth(
    src: &ImageBuffer,
    k: &CameraIntrinsics,
    pose: &Pose,
    depth: &DepthMap,
) -> Result<WarpResult, ImagingError> {
    Ok(warp_by_depth_with_coords(src, k, pose, depth)?.0)
}

/// [`warp_by_depth`] also returning the source-frame sample coordinate of
/// every target pixel (`None` where the reprojection is undefined).
pub fn warp_by_depth_with_coords(
    src: &ImageBuffer,
    k: &CameraIntrinsics,
    pose: &Pose,
    depth: &DepthMap,
) -> Result<(WarpResult, Vec<Option<Vector2<f64>>>), ImagingError> {
    check_same_size(src.width(), src.height(), depth.width(), depth.height())?;
    check_same_size(src.width(), src.height(), k.width, k.height)?;
    let (w, h) = (depth.width(), depth.height());
    let mut coords = vec![None; w * h];
    for y in 0..h {
        for x in 0..w {
            let Some(d) = depth.get(x, y) else { continue };
            coords[y * w + x] =
                reproject_pixel(k, pose, d, Vector2::new(x as f64, y as f64));
        }
    }
    Ok((sample_at_coords(src, &coords), coords))
}

/// Warps `src` so that target pixel `p` shows `src` at `H p`.
pub fn warp_by_homography(src: &ImageBuffer, h: &Homography) -> WarpResult {
    warp_by_homography_with_coords(src, h).0
}

/// [`warp_by_homography`] also returning per-pixel sample coordinates.
pub fn warp_by_homography_with_coords(
    src: &ImageBuffer,
    h: &Homography,
) -> (WarpResult, Vec<Option<Vector2<f64>>>) {
    let (w, ht) = (src.width(), src.height());
    let mut coords = vec![None; w * ht];
    for y in 0..ht {
        for x in 0..w {
            coords[y * w + x] = h.apply(Vector2::new(x as f64, y as f64));
        }
    }
    (sample_at_coords(src, &coords), coords)
}
