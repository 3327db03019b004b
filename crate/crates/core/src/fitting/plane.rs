use nalgebra::{Matrix3, Vector2, Vector3};

use super::ransac::ransac_core;
use super::{FitError, FitReport, PointCloud, RansacConfig};
use crate::geometry::{backproject, plane_residual, CameraIntrinsics, GroundPlane};
use crate::imaging::{DepthMap, RoadMask};

/// Back-projects every masked valid depth pixel into a camera-frame point
/// cloud with pixel provenance. An empty result is allowed.
pub fn depth_to_points(
    depth: &DepthMap,
    k: &CameraIntrinsics,
    mask: &RoadMask,
) -> Result<PointCloud, FitError> {
    if depth.width() != mask.width() || depth.height() != mask.height() {
        return Err(FitError::InvalidConfig(format!(
            "depth {}x{} vs mask {}x{}",
            depth.width(),
            depth.height(),
            mask.width(),
            mask.height()
        )));
    }
    let mut points = Vec::new();
    let mut pixels = Vec::new();
    for y in 0..depth.height() {
        for x in 0..depth.width() {
            if !mask.get(x, y) {
                continue;
            }
            let Some(d) = depth.get(x, y) else { continue };
            let px = Vector2::new(x as f64, y as f64);
            points.push(backproject(k, px, d)?);
            pixels.push(px);
        }
    }
    PointCloud::with_pixels(points, pixels)
}

/// Exact plane through three points; `None` when they are (near) collinear
/// or the camera center would not be strictly above the plane.
pub fn plane_from_three(
    a: Vector3<f64>,
    b: Vector3<f64>,
    c: Vector3<f64>,
) -> Option<GroundPlane> {
    let normal = (b - a).cross(&(c - a));
    let scale = (b - a).norm().max((c - a).norm());
    if normal.norm() < 1e-12 * scale * scale.max(1.0) {
        return None;
    }
    let n = normal.normalize();
    let h = -n.dot(&a);
    let (n, h) = if h < 0.0 { (-n, -h) } else { (n, h) };
    GroundPlane::new(n, h).ok()
}

/// Total-least-squares plane: centroid plus the smallest principal
/// direction of the scatter matrix; normal sign fixed so `h > 0`.
///
/// Degenerate when fewer than 3 points, a (near-)collinear configuration
/// (middle scatter eigenvalue below `1e-12` of the largest), or a plane
/// through the camera center.
pub fn fit_plane_lsq(points: &PointCloud) -> Result<GroundPlane, FitError> {
    fit_plane_lsq_indices(points, None)
}

fn fit_plane_lsq_indices(
    cloud: &PointCloud,
    subset: Option<&[usize]>,
) -> Result<GroundPlane, FitError> {
    let pts = cloud.points();
    let count = subset.map_or(pts.len(), <[usize]>::len);
    if count < 3 {
        return Err(FitError::TooFewItems { needed: 3, got: count });
    }
    let get = |i: usize| subset.map_or(pts[i], |s| pts[s[i]]);
    let mut centroid = Vector3::zeros();
    for i in 0..count {
        centroid += get(i);
    }
    centroid /= count as f64;
    let mut scatter = Matrix3::zeros();
    for i in 0..count {
        let d = get(i) - centroid;
        scatter += d * d.transpose();
    }
    let eigen = scatter.symmetric_eigen();
    // Sort eigenpairs ascending by eigenvalue.
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eigen.eigenvalues[i].total_cmp(&eigen.eigenvalues[j]));
    let [lo, mid, hi] = order;
    if eigen.eigenvalues[mid] <= 1e-12 * eigen.eigenvalues[hi].max(1e-300) {
        return Err(FitError::Degenerate(
            "points are collinear or coincident; plane is underdetermined".into(),
        ));
    }
    let n: Vector3<f64> = eigen.eigenvectors.column(lo).into();
    let h = -n.dot(&centroid);
    let (n, h) = if h < 0.0 { (-n, -h) } else { (n, h) };
    GroundPlane::new(n, h)
        .map_err(|e| FitError::Degenerate(format!("plane through camera center: {e}")))
}

/// 3-point RANSAC with perpendicular-distance inliers and a final
/// least-squares refit (inliers recomputed against the refit plane).
pub fn ransac_plane(
    cloud: &PointCloud,
    cfg: &RansacConfig,
) -> Result<FitReport<GroundPlane>, FitError> {
    let pts = cloud.points();
    let (hyp, _, iterations) = ransac_core(
        pts.len(),
        3,
        cfg,
        |s| plane_from_three(pts[s[0]], pts[s[1]], pts[s[2]]),
        |plane: &GroundPlane, i| plane_residual(plane, pts[i]).abs(),
    )?;
    let hyp_inliers: Vec<usize> = (0..pts.len())
        .filter(|&i| plane_residual(&hyp, pts[i]).abs() <= cfg.inlier_threshold)
        .collect();
    let model = fit_plane_lsq_indices(cloud, Some(&hyp_inliers))?;
    let inliers: Vec<usize> = (0..pts.len())
        .filter(|&i| plane_residual(&model, pts[i]).abs() <= cfg.inlier_threshold)
        .collect();
    let inlier_ratio = inliers.len() as f64 / pts.len() as f64;
    Ok(FitReport { model, inliers, inlier_ratio, iterations })
}
