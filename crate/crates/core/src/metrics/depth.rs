//! Depth-map error and accuracy metrics with selectable scale recovery.

use serde::{Deserialize, Serialize};

use super::{median, MetricReport, MetricsError};
use crate::imaging::{DepthMap, RoadMask};

/// How the predicted depth is scaled before comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum DepthScaling {
    /// Multiply the prediction by `median(gt) / median(pred)` over the
    /// evaluated pixels (per-image median ground-truth scaling).
    MedianGt,
    /// Multiply the prediction by a caller-supplied factor, typically the
    /// calibrated-over-estimated camera-height ratio.
    CameraHeight { scale: f64 },
    /// Compare raw values.
    None,
}

/// Configuration for [`depth_metrics`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthEvalConfig {
    pub scaling: DepthScaling,
    /// Ground-truth pixels outside `[min_depth, max_depth]` are excluded;
    /// scaled predictions are clamped into the same range.
    pub min_depth: f64,
    pub max_depth: f64,
}

impl Default for DepthEvalConfig {
    fn default() -> Self {
        Self { scaling: DepthScaling::MedianGt, min_depth: 0.1, max_depth: 80.0 }
    }
}

impl DepthEvalConfig {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if !(self.min_depth.is_finite()
            && self.max_depth.is_finite()
            && self.min_depth > 0.0
            && self.min_depth < self.max_depth)
        {
            return Err(MetricsError::InvalidConfig(format!(
                "depth clamp must satisfy 0 < min < max, got [{}, {}]",
                self.min_depth, self.max_depth
            )));
        }
        if let DepthScaling::CameraHeight { scale } = self.scaling {
            if !(scale.is_finite() && scale > 0.0) {
                return Err(MetricsError::InvalidConfig(format!(
                    "camera-height scale must be positive, got {scale}"
                )));
            }
        }
        Ok(())
    }
}

/// Standard depth error and accuracy numbers over the evaluated pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthMetrics {
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub rmse: f64,
    pub rmse_log: f64,
    /// Fractions of pixels with `max(pred/gt, gt/pred) < 1.25^k`.
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    /// Number of pixels that entered the evaluation.
    pub pixel_count: usize,
    /// The scale factor that was applied to the prediction.
    pub applied_scale: f64,
}

impl DepthMetrics {
    pub fn report(&self) -> Result<MetricReport, MetricsError> {
        let mut report = MetricReport::new("depth");
        report.put("abs_rel", self.abs_rel)?;
        report.put("sq_rel", self.sq_rel)?;
        report.put("rmse", self.rmse)?;
        report.put("rmse_log", self.rmse_log)?;
        report.put("delta1", self.delta1)?;
        report.put("delta2", self.delta2)?;
        report.put("delta3", self.delta3)?;
        report.put("pixel_count", self.pixel_count as f64)?;
        report.put("applied_scale", self.applied_scale)?;
        Ok(report)
    }
}

/// Compares a predicted depth map against ground truth over pixels that are
/// valid in both maps, inside the optional mask, and whose ground truth lies
/// in the configured range. The scaled prediction is clamped to that range
/// before the error terms are accumulated.
pub fn depth_metrics(
    pred: &DepthMap,
    gt: &DepthMap,
    mask: Option<&RoadMask>,
    cfg: &DepthEvalConfig,
) -> Result<DepthMetrics, MetricsError> {
    cfg.validate()?;
    if pred.width() != gt.width() || pred.height() != gt.height() {
        return Err(MetricsError::DimensionMismatch(format!(
            "prediction is {}x{}, ground truth is {}x{}",
            pred.width(),
            pred.height(),
            gt.width(),
            gt.height()
        )));
    }
    if let Some(m) = mask {
        if m.width() != gt.width() || m.height() != gt.height() {
            return Err(MetricsError::DimensionMismatch(format!(
                "mask is {}x{}, images are {}x{}",
                m.width(),
                m.height(),
                gt.width(),
                gt.height()
            )));
        }
    }
    let n_pixels = gt.width() * gt.height();
    let mut pred_vals = Vec::new();
    let mut gt_vals = Vec::new();
    for i in 0..n_pixels {
        if !(pred.validity()[i] && gt.validity()[i]) {
            continue;
        }
        if let Some(m) = mask {
            if !m.data()[i] {
                continue;
            }
        }
        let g = gt.depths()[i];
        if !(cfg.min_depth..=cfg.max_depth).contains(&g) {
            continue;
        }
        pred_vals.push(pred.depths()[i]);
        gt_vals.push(g);
    }
    if pred_vals.is_empty() {
        return Err(MetricsError::EmptyValidSet);
    }
    let scale = match cfg.scaling {
        DepthScaling::MedianGt => median(&gt_vals) / median(&pred_vals),
        DepthScaling::CameraHeight { scale } => scale,
        DepthScaling::None => 1.0,
    };
    if !(scale.is_finite() && scale > 0.0) {
        return Err(MetricsError::NonFinite(format!("depth scale evaluated to {scale}")));
    }
    let n = pred_vals.len() as f64;
    let (mut abs_rel, mut sq_rel, mut sq, mut sq_log) = (0.0, 0.0, 0.0, 0.0);
    let (mut d1, mut d2, mut d3) = (0usize, 0usize, 0usize);
    for (&p_raw, &g) in pred_vals.iter().zip(&gt_vals) {
        let p = (p_raw * scale).clamp(cfg.min_depth, cfg.max_depth);
        let diff = p - g;
        abs_rel += diff.abs() / g;
        sq_rel += diff * diff / g;
        sq += diff * diff;
        sq_log += (p.ln() - g.ln()).powi(2);
        let ratio = (p / g).max(g / p);
        if ratio < 1.25 {
            d1 += 1;
        }
        if ratio < 1.25f64.powi(2) {
            d2 += 1;
        }
        if ratio < 1.25f64.powi(3) {
            d3 += 1;
        }
    }
    Ok(DepthMetrics {
        abs_rel: abs_rel / n,
        sq_rel: sq_rel / n,
        rmse: (sq / n).sqrt(),
        rmse_log: (sq_log / n).sqrt(),
        delta1: d1 as f64 / n,
        delta2: d2 as f64 / n,
        delta3: d3 as f64 / n,
        pixel_count: pred_vals.len(),
        applied_scale: scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_depth(w: usize, h: usize, seed: u64, lo: f64, hi: f64) -> DepthMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let depths = (0..w * h).map(|_| rng.random_range(lo..hi)).collect();
        DepthMap::from_vec(w, h, depths, vec![true; w * h]).unwrap()
    }

    fn cfg(scaling: DepthScaling) -> DepthEvalConfig {
        DepthEvalConfig { scaling, ..DepthEvalConfig::default() }
    }

    #[test]
    fn perfect_prediction_scores_zero_errors_and_unit_accuracy() {
        let gt = random_depth(12, 9, 1, 1.0, 40.0);
        let m = depth_metrics(&gt, &gt, None, &cfg(DepthScaling::None)).unwrap();
        assert_eq!(m.abs_rel, 0.0);
        assert_eq!(m.sq_rel, 0.0);
        assert_eq!(m.rmse, 0.0);
        assert_eq!(m.rmse_log, 0.0);
        assert_eq!((m.delta1, m.delta2, m.delta3), (1.0, 1.0, 1.0));
        assert_eq!(m.pixel_count, 12 * 9);
    }

    #[test]
    fn median_gt_scaling_cancels_a_doubled_prediction_exactly() {
        let gt = random_depth(10, 8, 2, 1.0, 30.0);
        let pred = gt.scaled(2.0).unwrap();
        let m = depth_metrics(&pred, &gt, None, &cfg(DepthScaling::MedianGt)).unwrap();
        assert_eq!(m.abs_rel, 0.0);
        assert_eq!(m.rmse, 0.0);
        assert_eq!(m.delta1, 1.0);
        assert!((m.applied_scale - 0.5).abs() < 1e-15);
    }

    #[test]
    fn twenty_percent_overestimate_without_scaling_closed_form() {
        let gt = random_depth(16, 12, 3, 1.0, 50.0);
        let pred = gt.scaled(1.2).unwrap();
        let m = depth_metrics(&pred, &gt, None, &cfg(DepthScaling::None)).unwrap();
        assert!((m.abs_rel - 0.2).abs() < 1e-12, "{}", m.abs_rel);
        // 1.2 < 1.25, so every accuracy bucket is full.
        assert_eq!((m.delta1, m.delta2, m.delta3), (1.0, 1.0, 1.0));
        // SqRel closed form: 0.04 * mean(gt).
        let mean_gt = gt.depths().iter().sum::<f64>() / gt.depths().len() as f64;
        assert!((m.sq_rel - 0.04 * mean_gt).abs() < 1e-9);
    }

    #[test]
    fn accuracy_thresholds_use_the_symmetric_ratio() {
        // Under-estimation by 1/1.3: ratio max(p/g, g/p) = 1.3 fails delta1,
        // passes delta2 and delta3.
        let gt = random_depth(8, 8, 4, 2.0, 20.0);
        let pred = gt.scaled(1.0 / 1.3).unwrap();
        let m = depth_metrics(&pred, &gt, None, &cfg(DepthScaling::None)).unwrap();
        assert_eq!(m.delta1, 0.0);
        assert_eq!(m.delta2, 1.0);
        assert_eq!(m.delta3, 1.0);
    }

    #[test]
    fn median_gt_mode_is_invariant_to_any_positive_prediction_scale() {
        let gt = random_depth(14, 10, 5, 1.5, 35.0);
        let pred = random_depth(14, 10, 6, 1.5, 35.0);
        let base = depth_metrics(&pred, &gt, None, &cfg(DepthScaling::MedianGt)).unwrap();
        for factor in [0.103, 3.7, 42.0] {
            let scaled = pred.scaled(factor).unwrap();
            let m = depth_metrics(&scaled, &gt, None, &cfg(DepthScaling::MedianGt)).unwrap();
            assert!((m.abs_rel - base.abs_rel).abs() < 1e-12);
            assert!((m.rmse - base.rmse).abs() < 1e-9);
            assert!((m.delta1 - base.delta1).abs() < 1e-15);
        }
    }

    #[test]
    fn camera_height_scaling_applies_the_given_factor() {
        // Powers of two make scale round trips exact in floating point.
        let depths: Vec<f64> = (0..24).map(|i| 2.0f64.powi((i % 4) + 1)).collect();
        let gt = DepthMap::from_vec(6, 4, depths, vec![true; 24]).unwrap();
        let pred = gt.scaled(1.0 / 1.5).unwrap();
        let m = depth_metrics(
            &pred,
            &gt,
            None,
            &cfg(DepthScaling::CameraHeight { scale: 1.5 }),
        )
        .unwrap();
        assert_eq!(m.abs_rel, 0.0);
        assert_eq!(m.applied_scale, 1.5);
    }

    #[test]
    fn mask_and_validity_exclude_pixels() {
        let gt = random_depth(6, 6, 7, 1.0, 20.0);
        let mut pred = gt.clone();
        // Corrupt one pixel, then mask it out: metrics stay perfect.
        let mut depths = pred.depths().to_vec();
        depths[0] = 19.0;
        pred = DepthMap::from_vec(6, 6, depths, vec![true; 36]).unwrap();
        let mask = RoadMask::from_fn(6, 6, |x, y| !(x == 0 && y == 0));
        let m = depth_metrics(&pred, &gt, Some(&mask), &cfg(DepthScaling::None)).unwrap();
        assert_eq!(m.abs_rel, 0.0);
        assert_eq!(m.pixel_count, 35);
    }

    #[test]
    fn ground_truth_outside_the_clamp_range_is_excluded() {
        let mut depths = vec![5.0; 16];
        depths[3] = 200.0;
        depths[7] = 0.05;
        let gt = DepthMap::from_vec(4, 4, depths, vec![true; 16]).unwrap();
        let pred = gt.clone();
        let m = depth_metrics(&pred, &gt, None, &cfg(DepthScaling::None)).unwrap();
        assert_eq!(m.pixel_count, 14);
        assert_eq!(m.abs_rel, 0.0);
    }

    #[test]
    fn scaled_prediction_is_clamped_into_range() {
        let gt = DepthMap::constant(4, 4, 70.0).unwrap();
        let pred = DepthMap::constant(4, 4, 400.0).unwrap();
        let m = depth_metrics(&pred, &gt, None, &cfg(DepthScaling::None)).unwrap();
        // Prediction clamps to 80, so AbsRel = 10/70.
        assert!((m.abs_rel - 10.0 / 70.0).abs() < 1e-12);
    }

    #[test]
    fn empty_selection_and_bad_config_are_rejected() {
        let gt = DepthMap::from_vec(3, 3, vec![1.0; 9], vec![false; 9]).unwrap();
        assert!(matches!(
            depth_metrics(&gt, &gt, None, &cfg(DepthScaling::None)),
            Err(MetricsError::EmptyValidSet)
        ));
        let ok = DepthMap::constant(3, 3, 5.0).unwrap();
        let bad = DepthEvalConfig {
            scaling: DepthScaling::None,
            min_depth: 2.0,
            max_depth: 1.0,
        };
        assert!(matches!(
            depth_metrics(&ok, &ok, None, &bad),
            Err(MetricsError::InvalidConfig(_))
        ));
        let bad_scale = cfg(DepthScaling::CameraHeight { scale: -1.0 });
        assert!(matches!(
            depth_metrics(&ok, &ok, None, &bad_scale),
            Err(MetricsError::InvalidConfig(_))
        ));
    }

    #[test]
    fn dimension_mismatches_are_rejected() {
        let a = DepthMap::constant(4, 4, 5.0).unwrap();
        let b = DepthMap::constant(5, 4, 5.0).unwrap();
        assert!(matches!(
            depth_metrics(&a, &b, None, &cfg(DepthScaling::None)),
            Err(MetricsError::DimensionMismatch(_))
        ));
        let mask = RoadMask::filled(3, 3, true);
        assert!(matches!(
            depth_metrics(&a, &a, Some(&mask), &cfg(DepthScaling::None)),
            Err(MetricsError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn scaling_mode_serialization_round_trips() {
        for scaling in [
            DepthScaling::MedianGt,
            DepthScaling::CameraHeight { scale: 1.25 },
            DepthScaling::None,
        ] {
            let json = serde_json::to_string(&scaling).unwrap();
            let back: DepthScaling = serde_json::from_str(&json).unwrap();
            assert_eq!(back, scaling);
        }
        assert_eq!(
            serde_json::to_string(&DepthScaling::MedianGt).unwrap(),
            "{\"mode\":\"median-gt\"}"
        );
    }
}
