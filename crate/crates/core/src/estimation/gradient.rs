//! Analytic gradient of the joint objective with respect to the state.
//!
//! Each term is differentiated along the same path its forward value is
//! computed on:
//!
//! * photometric — adjoint of the windowed SSIM statistics plus the L1
//!   sign, chained through bilinear sampling of the previous frame and the
//!   exact reprojection Jacobian of the depth warp;
//! * smoothness — signed forward differences of the mean-normalized field,
//!   with the normalization differentiated exactly;
//! * homography — bilinear sampling of the masked previous frame chained
//!   through the analytic homography derivatives
//!   ([`homography_jacobians`]).
//!
//! Camera-height scale recovery is part of the evaluation, so the chain
//! rule carries the scale `s = h_c / h_t` into the translation and grid
//! blocks. Two exact invariances keep the height-offset column sparse: the
//! photometric term is invariant under the joint rescaling of translation
//! and depth (scaling a point does not move its projection), and the
//! smoothness term normalizes by the field mean; only the homography term
//! (and the optional height penalty) moves the height offset.
//!
//! The losses are piecewise smooth: validity indicators (out-of-view
//! pixels, mask boundaries) switch discretely with the state. The gradient
//! returned here is the gradient of the smooth piece the state sits in,
//! which is the standard treatment for direct photometric objectives.

use nalgebra::{DVector, Vector2, Vector3};

use crate::geometry::{
    compose_homography, homography_jacobians, rot_x, rot_z, rotation_jacobians,
    CameraIntrinsics, CANONICAL_NORMAL,
};
use crate::imaging::{
    apply_mask, bilinear_sample_with_grad, image_gradients_luma, warp_by_depth_with_coords,
    warp_by_homography, warp_by_homography_with_coords, ImageBuffer, ImagingError,
    SmoothnessTarget,
};
use crate::imaging::{box3_adjoint, ssim_stats, MASK_STRICT_EPS, SSIM_C1, SSIM_C2};

use super::loss::{pair_context, LevelContext, RoadMasks};
use super::state::{
    node_footprint, Decoded, StateVector, IDX_GRID, IDX_PLANE_DH, IDX_PLANE_RX, IDX_PLANE_RZ,
    IDX_ROTATION, IDX_TRANSLATION,
};
use super::{sgn, EstimationError, EstimatorConfig};

/// Gradient of [`total_loss`](super::total_loss) with respect to every
/// state parameter, same conventions and error behavior as the forward
/// evaluation. Terms with zero weight are skipped entirely (so with
/// `xi == 0` the masks are never read).
pub fn total_loss_gradient(
    state: &StateVector,
    current: &ImageBuffer,
    previous: &ImageBuffer,
    masks: Option<RoadMasks<'_>>,
    k: &CameraIntrinsics,
    cfg: &EstimatorConfig,
) -> Result<DVector<f64>, EstimationError> {
    cfg.validate()?;
    let ctx = pair_context(current, previous, masks, k, cfg)?;
    context_gradient(state, &ctx, cfg)
}

pub(crate) fn context_gradient(
    state: &StateVector,
    ctx: &LevelContext<'_>,
    cfg: &EstimatorConfig,
) -> Result<DVector<f64>, EstimationError> {
    let (w, h) = (ctx.current.width(), ctx.current.height());
    let decoded = state.decode(w, h, cfg.camera_height)?;
    let mut grad = DVector::zeros(state.dim());
    if cfg.mu > 0.0 {
        let g = photometric_gradient(state, &decoded, ctx, cfg)?;
        grad.axpy(cfg.mu, &g, 1.0);
    }
    if cfg.lambda > 0.0 {
        let g = smoothness_gradient(state, &decoded, ctx, cfg)?;
        grad.axpy(cfg.lambda, &g, 1.0);
    }
    if cfg.xi > 0.0 {
        if let Some(masks) = &ctx.masks {
            let g = homography_gradient(state, &decoded, ctx, masks)?;
            grad.axpy(cfg.xi, &g, 1.0);
        }
    }
    if let Some(weight) = cfg.height_penalty {
        // |h_t - h_c| = |height_offset| exactly.
        grad[IDX_PLANE_DH] += weight * sgn(decoded.correction.height_offset);
    }
    Ok(grad)
}

/// Photometric term: `mean over valid pixels of
/// alpha (1 - SSIM)/2 + (1 - alpha) L1`, differentiated through the SSIM
/// window statistics, the bilinear sample of the previous frame, the
/// reprojection, and the depth decoding.
fn photometric_gradient(
    state: &StateVector,
    decoded: &Decoded,
    ctx: &LevelContext<'_>,
    cfg: &EstimatorConfig,
) -> Result<DVector<f64>, EstimationError> {
    let (w, h, ch) = (ctx.current.width(), ctx.current.height(), ctx.current.channels());
    let (recon, coords) = warp_by_depth_with_coords(
        ctx.previous,
        ctx.k,
        &decoded.pose_adjusted,
        &decoded.depth_adjusted,
    )?;
    let n_valid = recon.valid_count();
    if n_valid == 0 {
        return Err(ImagingError::EmptyValiditySet.into());
    }

    // Upstream derivative with respect to the reconstructed luma map `b`.
    // The SSIM at pixel p reads mu_b, var_b and cov over p's 3x3 window, so
    // dE/db gathers through the box-filter adjoint; invalid pixels carry
    // constant zeros and receive no derivative.
    let la = ctx.current.luma();
    let lb = recon.image.luma();
    let a = la.data();
    let b = lb.data();
    let stats = ssim_stats(a, b, w, h);
    let u = -cfg.alpha / (2.0 * n_valid as f64);
    let mut g_mu = vec![0.0; w * h];
    let mut g_vb = vec![0.0; w * h];
    let mut g_ab = vec![0.0; w * h];
    for i in 0..w * h {
        if !recon.validity[i] {
            continue;
        }
        let (mu_a, mu_b) = (stats.mu_a[i], stats.mu_b[i]);
        let a1 = 2.0 * mu_a * mu_b + SSIM_C1;
        let a2 = 2.0 * stats.cov[i] + SSIM_C2;
        let b1 = mu_a * mu_a + mu_b * mu_b + SSIM_C1;
        let b2 = stats.var_a[i] + stats.var_b[i] + SSIM_C2;
        // b1 >= C1 > 0 and b2 >= C2 > 0, so these denominators are safe.
        let ds_dmu_b = 2.0 * a2 * (mu_a * b1 - mu_b * a1) / (b1 * b1 * b2);
        let ds_dvar_b = -(a1 * a2) / (b1 * b2 * b2);
        let ds_dcov = 2.0 * a1 / (b1 * b2);
        g_mu[i] = u * (ds_dmu_b - 2.0 * mu_b * ds_dvar_b - mu_a * ds_dcov);
        g_vb[i] = u * ds_dvar_b;
        g_ab[i] = u * ds_dcov;
    }
    let adj_mu = box3_adjoint(&g_mu, w, h);
    let adj_vb = box3_adjoint(&g_vb, w, h);
    let adj_ab = box3_adjoint(&g_ab, w, h);

    let mut grad = DVector::zeros(state.dim());
    let rot = decoded.pose_adjusted.rotation_matrix();
    let dr = rotation_jacobians(decoded.pose_adjusted.angle_axis());
    let scale = decoded.scale;
    let l1_coeff = (1.0 - cfg.alpha) / (n_valid as f64 * ch as f64);
    let ch_f = ch as f64;
    let (gw, gh) = (state.grid_width(), state.grid_height());
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !recon.validity[i] {
                continue;
            }
            let Some(wq) = coords[i] else { continue };
            let dedb = adj_mu[i] + 2.0 * b[i] * adj_vb[i] + a[i] * adj_ab[i];
            let mut dwx = 0.0;
            let mut dwy = 0.0;
            for c in 0..ch {
                let Some((_, gx, gy)) = bilinear_sample_with_grad(ctx.previous, wq.x, wq.y, c)
                else {
                    continue;
                };
                let up = dedb / ch_f
                    + l1_coeff * sgn(recon.image.get(x, y, c) - ctx.current.get(x, y, c));
                dwx += up * gx;
                dwy += up * gy;
            }
            let m = ctx.k.ray(Vector2::new(x as f64, y as f64));
            let depth = decoded.depth_adjusted.raw(x, y);
            let pc = rot * (m * depth) + decoded.pose_adjusted.translation();
            let iz = 1.0 / pc.z;
            let dedp = Vector3::new(
                ctx.k.fx * dwx * iz,
                ctx.k.fy * dwy * iz,
                -(ctx.k.fx * dwx * pc.x + ctx.k.fy * dwy * pc.y) * iz * iz,
            );
            for axis in 0..3 {
                grad[IDX_ROTATION + axis] += dedp.dot(&(dr[axis] * m)) * depth;
                grad[IDX_TRANSLATION + axis] += scale * dedp[axis];
            }
            // Depth enters as exp(-L) * s; d(depth)/dL = -depth.
            let dedl = -dedp.dot(&(rot * m)) * depth;
            for (node, weight) in node_footprint(x, y, w, h, gw, gh) {
                grad[IDX_GRID + node] += weight * dedl;
            }
        }
    }
    Ok(grad)
}

/// Smoothness term: signed forward differences of the mean-normalized
/// field, edge weights from the current image held constant. Scale drops
/// out of the normalized field, so only the grid block is touched.
fn smoothness_gradient(
    state: &StateVector,
    decoded: &Decoded,
    ctx: &LevelContext<'_>,
    cfg: &EstimatorConfig,
) -> Result<DVector<f64>, EstimationError> {
    let depth = &decoded.depth_adjusted;
    let (w, h) = (depth.width(), depth.height());
    if w < 2 || h < 2 {
        return Err(
            ImagingError::InvalidBuffer("smoothness needs at least 2x2 pixels".into()).into()
        );
    }
    // Field and mean, mirroring the forward evaluation.
    let sigma = match cfg.smoothness_target {
        SmoothnessTarget::InverseDepth => 1.0,
        SmoothnessTarget::Depth => -1.0,
    };
    let validity = depth.validity();
    let mut v = vec![0.0; w * h];
    let mut sum = 0.0;
    let mut n_valid = 0usize;
    for i in 0..w * h {
        if !validity[i] {
            continue;
        }
        let d = depth.depths()[i];
        v[i] = match cfg.smoothness_target {
            SmoothnessTarget::InverseDepth => 1.0 / d,
            SmoothnessTarget::Depth => d,
        };
        sum += v[i];
        n_valid += 1;
    }
    if n_valid == 0 {
        return Err(ImagingError::DegenerateDepth.into());
    }
    let mean = sum / n_valid as f64;
    let f: Vec<f64> = v.iter().map(|x| x / mean).collect();

    let grads = image_gradients_luma(ctx.current);
    let mut dedf = vec![0.0; w * h];
    let mut n_interior = 0usize;
    for y in 0..h - 1 {
        for x in 0..w - 1 {
            let i = y * w + x;
            if !(validity[i] && validity[i + 1] && validity[i + w]) {
                continue;
            }
            n_interior += 1;
        }
    }
    if n_interior == 0 {
        return Err(ImagingError::DegenerateDepth.into());
    }
    let inv_n = 1.0 / n_interior as f64;
    for y in 0..h - 1 {
        for x in 0..w - 1 {
            let i = y * w + x;
            if !(validity[i] && validity[i + 1] && validity[i + w]) {
                continue;
            }
            let sx = sgn(f[i + 1] - f[i]) * (-grads.dx_at(x, y, 0).abs()).exp() * inv_n;
            dedf[i + 1] += sx;
            dedf[i] -= sx;
            let sy = sgn(f[i + w] - f[i]) * (-grads.dy_at(x, y, 0).abs()).exp() * inv_n;
            dedf[i + w] += sy;
            dedf[i] -= sy;
        }
    }

    // f_j = v_j / mean with mean over valid pixels:
    // dE/dv_j = (dedf_j - (1/n) sum_i dedf_i f_i) / mean.
    let correction: f64 =
        dedf.iter().zip(&f).map(|(g, fi)| g * fi).sum::<f64>() / n_valid as f64;
    let (gw, gh) = (state.grid_width(), state.grid_height());
    let mut grad = DVector::zeros(state.dim());
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !validity[i] {
                continue;
            }
            let dedv = (dedf[i] - correction) / mean;
            // v = (1/depth)^sigma and depth = s exp(-L), so dv/dL = sigma v.
            let dedl = dedv * sigma * v[i];
            for (node, weight) in node_footprint(x, y, w, h, gw, gh) {
                grad[IDX_GRID + node] += weight * dedl;
            }
        }
    }
    Ok(grad)
}

/// Homography term: mean L1 between the current frame and the previous
/// frame warped by the plane-induced homography over the mutually-visible
/// road, differentiated through the analytic homography derivatives. Depth
/// does not enter; the plane correction and pose blocks do.
fn homography_gradient(
    state: &StateVector,
    decoded: &Decoded,
    ctx: &LevelContext<'_>,
    masks: &RoadMasks<'_>,
) -> Result<DVector<f64>, EstimationError> {
    let (w, h, ch) = (ctx.current.width(), ctx.current.height(), ctx.current.channels());
    let hom = compose_homography(ctx.k, &decoded.pose_adjusted, &decoded.plane_adjusted)?;
    let masked_prev = apply_mask(ctx.previous, masks.previous)?;
    let (warped, coords) = warp_by_homography_with_coords(&masked_prev, &hom);
    let warped_mask = warp_by_homography(&masks.previous.to_image(), &hom);

    let mut pixels = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if warped.validity[i]
                && warped_mask.validity[i]
                && masks.current.get(x, y)
                && warped_mask.image.data()[i] >= 1.0 - MASK_STRICT_EPS
            {
                pixels.push((x, y, i));
            }
        }
    }
    if pixels.is_empty() {
        return Err(ImagingError::EmptyMaskIntersection.into());
    }
    let up0 = 1.0 / (pixels.len() as f64 * ch as f64);

    // Plane-normal chain: N = Rx(rot_x) Rz(rot_z) N_canonical. The
    // derivative with respect to each correction angle is the matching
    // column of the angle-axis rotation Jacobian along that axis.
    let corr = &decoded.correction;
    let dn_drx =
        rotation_jacobians(Vector3::new(corr.rot_x, 0.0, 0.0))[0]
            * (rot_z(corr.rot_z) * CANONICAL_NORMAL);
    let dn_drz = rot_x(corr.rot_x)
        * (rotation_jacobians(Vector3::new(0.0, 0.0, corr.rot_z))[2] * CANONICAL_NORMAL);
    let scale = decoded.scale;

    let mut grad = DVector::zeros(state.dim());
    for (x, y, i) in pixels {
        let Some(wq) = coords[i] else { continue };
        let mut dwx = 0.0;
        let mut dwy = 0.0;
        for c in 0..ch {
            let Some((_, gx, gy)) = bilinear_sample_with_grad(&masked_prev, wq.x, wq.y, c)
            else {
                continue;
            };
            let sg = up0 * sgn(warped.image.get(x, y, c) - ctx.current.get(x, y, c));
            dwx += sg * gx;
            dwy += sg * gy;
        }
        let dedw = Vector2::new(dwx, dwy);
        // The Jacobian path tests |y_3| against an absolute epsilon while
        // the warp uses a scale-relative one; a pixel can sit between the
        // two only on the measure-zero horizon line — skip it there.
        let Ok(hj) = homography_jacobians(
            ctx.k,
            &decoded.pose_adjusted,
            &decoded.plane_adjusted,
            Vector2::new(x as f64, y as f64),
        ) else {
            continue;
        };
        for axis in 0..3 {
            grad[IDX_ROTATION + axis] += dedw.dot(&hj.rotation.column(axis));
            grad[IDX_TRANSLATION + axis] += scale * dedw.dot(&hj.translation.column(axis));
        }
        // Height offset moves the homography through t_raw / h_t; in
        // adjusted quantities that is `s` times the plane-height column.
        grad[IDX_PLANE_DH] += scale * dedw.dot(&hj.height);
        grad[IDX_PLANE_RX] += dedw.dot(&(hj.normal * dn_drx));
        grad[IDX_PLANE_RZ] += dedw.dot(&(hj.normal * dn_drz));
    }
    Ok(grad)
}
