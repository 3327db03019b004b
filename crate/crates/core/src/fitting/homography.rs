use nalgebra::{DMatrix, Matrix3, Vector2, Vector3};

use super::ransac::ransac_core;
use super::{CorrespondenceSet, FitError, FitReport, RansacConfig};
use crate::geometry::Homography;

/// Hartley normalization: translate the centroid to the origin and scale so
/// the mean distance from it is sqrt(2). `None` for (near-)coincident points.
fn normalizing_transform(points: &[Vector2<f64>]) -> Option<Matrix3<f64>> {
    let n = points.len() as f64;
    let centroid = points.iter().sum::<Vector2<f64>>() / n;
    let mean_dist = points.iter().map(|p| (p - centroid).norm()).sum::<f64>() / n;
    if mean_dist < 1e-12 {
        return None;
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Some(Matrix3::new(
        s,
        0.0,
        -s * centroid.x,
        0.0,
        s,
        -s * centroid.y,
        0.0,
        0.0,
        1.0,
    ))
}

fn transform_point(t: &Matrix3<f64>, p: Vector2<f64>) -> Vector2<f64> {
    let q = t * Vector3::new(p.x, p.y, 1.0);
    Vector2::new(q.x / q.z, q.y / q.z)
}

/// Normalized direct linear transform on a subset of the pairs.
fn dlt_indices(c: &CorrespondenceSet, subset: Option<&[usize]>) -> Result<Homography, FitError> {
    let pairs = c.pairs();
    let count = subset.map_or(pairs.len(), <[usize]>::len);
    if count < 4 {
        return Err(FitError::TooFewItems { needed: 4, got: count });
    }
    let get = |i: usize| subset.map_or(pairs[i], |s| pairs[s[i]]);
    let cur: Vec<Vector2<f64>> = (0..count).map(|i| get(i).current).collect();
    let prev: Vec<Vector2<f64>> = (0..count).map(|i| get(i).previous).collect();
    let t_cur = normalizing_transform(&cur)
        .ok_or_else(|| FitError::Degenerate("current points coincide".into()))?;
    let t_prev = normalizing_transform(&prev)
        .ok_or_else(|| FitError::Degenerate("previous points coincide".into()))?;

    // 2N x 9 DLT design matrix for prev ~ H * cur in normalized coordinates,
    // padded with zero rows to at least 9 so the thin SVD carries the full
    // set of right singular vectors (including the null direction).
    let mut design = DMatrix::<f64>::zeros((2 * count).max(9), 9);
    for i in 0..count {
        let p = transform_point(&t_cur, cur[i]);
        let q = transform_point(&t_prev, prev[i]);
        let rows: [[f64; 9]; 2] = [
            [0.0, 0.0, 0.0, -p.x, -p.y, -1.0, q.y * p.x, q.y * p.y, q.y],
            [p.x, p.y, 1.0, 0.0, 0.0, 0.0, -q.x * p.x, -q.x * p.y, -q.x],
        ];
        for (r, row) in rows.iter().enumerate() {
            for (col, value) in row.iter().enumerate() {
                design[(2 * i + r, col)] = *value;
            }
        }
    }
    let svd = design.svd(false, true);
    let v_t = svd
        .v_t
        .as_ref()
        .ok_or_else(|| FitError::Degenerate("singular value decomposition failed".into()))?;
    let mut order: Vec<usize> = (0..9).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    // Unique solution requires rank 8: exactly one (near-)zero singular value.
    if svd.singular_values[order[1]] <= 1e-6 * svd.singular_values[order[8]].max(1e-300) {
        return Err(FitError::Degenerate(
            "design matrix rank below 8 (collinear or repeated points)".into(),
        ));
    }
    let hv = v_t.row(order[0]);
    let h_norm = Matrix3::new(hv[0], hv[1], hv[2], hv[3], hv[4], hv[5], hv[6], hv[7], hv[8]);
    let t_prev_inv = t_prev
        .try_inverse()
        .ok_or_else(|| FitError::Degenerate("normalization transform not invertible".into()))?;
    let h = Homography::from_matrix(t_prev_inv * h_norm * t_cur)
        .map_err(|e| FitError::Degenerate(format!("recovered matrix unusable: {e}")))?;
    h.normalized()
        .map_err(|e| FitError::Degenerate(format!("recovered matrix unusable: {e}")))
}

/// Hartley-normalized DLT over all pairs; the result is scaled so
/// `H[2][2] = 1`.
pub fn dlt_homography(c: &CorrespondenceSet) -> Result<Homography, FitError> {
    dlt_indices(c, None)
}

/// Symmetric transfer error of one pair: the larger of the forward
/// (`H p_t` vs `p_prev`) and backward (`H^-1 p_prev` vs `p_t`) distances.
/// Pairs mapping to infinity score infinite.
pub fn symmetric_transfer_error(
    h: &Homography,
    h_inv: &Homography,
    current: Vector2<f64>,
    previous: Vector2<f64>,
) -> f64 {
    let forward = h.apply(current).map_or(f64::INFINITY, |q| (q - previous).norm());
    let backward = h_inv.apply(previous).map_or(f64::INFINITY, |q| (q - current).norm());
    forward.max(backward)
}

#[derive(Clone)]
struct HypothesisPair {
    h: Homography,
    h_inv: Homography,
}

/// 4-point RANSAC with symmetric-transfer-error inliers and a DLT refit on
/// the consensus set (inliers recomputed against the refit model).
pub fn ransac_homography(
    c: &CorrespondenceSet,
    cfg: &RansacConfig,
) -> Result<FitReport<Homography>, FitError> {
    let pairs = c.pairs();
    let (hyp, _, iterations) = ransac_core(
        pairs.len(),
        4,
        cfg,
        |s| {
            let h = dlt_indices(c, Some(s)).ok()?;
            let h_inv = h.inverse().ok()?;
            Some(HypothesisPair { h, h_inv })
        },
        |m: &HypothesisPair, i| {
            symmetric_transfer_error(&m.h, &m.h_inv, pairs[i].current, pairs[i].previous)
        },
    )?;
    let hyp_inliers: Vec<usize> = (0..pairs.len())
        .filter(|&i| {
            symmetric_transfer_error(&hyp.h, &hyp.h_inv, pairs[i].current, pairs[i].previous)
                <= cfg.inlier_threshold
        })
        .collect();
    let model = dlt_indices(c, Some(&hyp_inliers))?;
    let model_inv = model
        .inverse()
        .map_err(|e| FitError::Degenerate(format!("refit not invertible: {e}")))?;
    let inliers: Vec<usize> = (0..pairs.len())
        .filter(|&i| {
            symmetric_transfer_error(&model, &model_inv, pairs[i].current, pairs[i].previous)
                <= cfg.inlier_threshold
        })
        .collect();
    let inlier_ratio = inliers.len() as f64 / pairs.len() as f64;
    Ok(FitReport { model, inliers, inlier_ratio, iterations })
}
