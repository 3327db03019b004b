//! Homography quality report built on correspondence reprojection errors.

use serde::{Deserialize, Serialize};

use super::{MetricReport, MetricsError};
use crate::fitting::{reprojection_error, CorrespondenceSet};
use crate::geometry::Homography;

/// Reprojection-error summary of a homography against ground-truth
/// correspondences. Pairs mapped to infinity are counted but excluded from
/// the statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomographyEvalReport {
    pub mean_px: f64,
    pub median_px: f64,
    pub p90_px: f64,
    pub max_px: f64,
    pub finite_pairs: usize,
    pub total_pairs: usize,
    /// Finite per-pair forward reprojection errors, in input order.
    pub per_pair_px: Vec<f64>,
}

impl HomographyEvalReport {
    pub fn report(&self) -> Result<MetricReport, MetricsError> {
        let mut report = MetricReport::new("homography");
        report.put("mean_px", self.mean_px)?;
        report.put("median_px", self.median_px)?;
        report.put("p90_px", self.p90_px)?;
        report.put("max_px", self.max_px)?;
        report.put("finite_pairs", self.finite_pairs as f64)?;
        report.put("total_pairs", self.total_pairs as f64)?;
        report.put_series("per_pair_px", self.per_pair_px.clone())?;
        Ok(report)
    }
}

/// Nearest-rank quantile of an ascending-sorted non-empty slice.
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

/// Evaluates a homography against ground-truth correspondences via forward
/// reprojection error, adding median/percentile summaries to the raw stats.
pub fn homography_eval(
    est: &Homography,
    gt: &CorrespondenceSet,
) -> Result<HomographyEvalReport, MetricsError> {
    let stats = reprojection_error(est, gt)?;
    let finite: Vec<f64> =
        stats.per_pair.iter().copied().filter(|e| e.is_finite()).collect();
    let mut sorted = finite.clone();
    sorted.sort_by(f64::total_cmp);
    Ok(HomographyEvalReport {
        mean_px: stats.mean,
        median_px: stats.median,
        p90_px: sorted_quantile(&sorted, 0.9),
        max_px: stats.max,
        finite_pairs: stats.finite_count,
        total_pairs: stats.per_pair.len(),
        per_pair_px: finite,
    })
}
