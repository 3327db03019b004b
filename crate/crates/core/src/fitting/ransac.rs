use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{FitError, RansacConfig};

/// Generic RANSAC loop shared by the plane and homography fitters.
///
/// Iteration `i` draws its minimal sample from an RNG seeded with
/// `(cfg.rng_seed, stream = i)`, so the hypothesis sequence is a pure
/// function of the seed regardless of how iterations are scheduled. The
/// iteration budget shrinks adaptively from the best inlier ratio seen,
/// using the standard `log(1 - confidence) / log(1 - w^k)` bound capped by
/// `cfg.max_iterations`.
///
/// Returns `(best hypothesis, its inlier indices, iterations executed)`.
pub(super) fn ransac_core<M: Clone>(
    data_len: usize,
    sample_size: usize,
    cfg: &RansacConfig,
    mut hypothesize: impl FnMut(&[usize]) -> Option<M>,
    mut distance: impl FnMut(&M, usize) -> f64,
) -> Result<(M, Vec<usize>, usize), FitError> {
    cfg.validate()?;
    if data_len < sample_size {
        return Err(FitError::TooFewItems { needed: sample_size, got: data_len });
    }
    let mut best: Option<(M, Vec<usize>)> = None;
    let mut budget = cfg.max_iterations;
    let mut iter = 0usize;
    while iter < budget {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
        rng.set_stream(iter as u64);
        let sample = rand::seq::index::sample(&mut rng, data_len, sample_size).into_vec();
        iter += 1;
        let Some(model) = hypothesize(&sample) else { continue };
        let inliers: Vec<usize> = (0..data_len)
            .filter(|&i| distance(&model, i) <= cfg.inlier_threshold)
            .collect();
        if best.as_ref().is_none_or(|(_, b)| inliers.len() > b.len()) {
            let ratio = inliers.len() as f64 / data_len as f64;
            best = Some((model, inliers));
            budget = budget.min(iterations_needed(ratio, sample_size, cfg.confidence))
                .max(iter);
        }
    }
    match best {
        Some((model, inliers)) if inliers.len() >= sample_size => Ok((model, inliers, iter)),
        _ => Err(FitError::NoConsensus { needed: sample_size }),
    }
}

/// Standard adaptive-RANSAC bound on the number of iterations needed to
/// sample an all-inlier minimal set with probability `confidence`, given
/// inlier ratio `w`.
fn iterations_needed(w: f64, sample_size: usize, confidence: f64) -> usize {
    if w >= 1.0 {
        return 1;
    }
    if w <= 0.0 {
        return usize::MAX;
    }
    let denom = (1.0 - w.powi(sample_size as i32)).ln();
    if denom >= 0.0 {
        // w^k underflowed to 0: no finite budget.
        return usize::MAX;
    }
    let n = ((1.0 - confidence).ln() / denom).ceil();
    if n.is_finite() && n > 0.0 {
        n as usize
    } else {
        1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iteration_bound_matches_closed_form() {
        // w = 0.5, k = 3, confidence 0.999:
        // ceil(ln(0.001) / ln(1 - 0.125)) = ceil(51.73...) = 52.
        assert_eq!(iterations_needed(0.5, 3, 0.999), 52);
        assert_eq!(iterations_needed(1.0, 4, 0.999), 1);
        assert_eq!(iterations_needed(0.0, 3, 0.999), usize::MAX);
    }

    #[test]
    fn sample_sequence_is_deterministic() {
        let cfg = RansacConfig { inlier_threshold: 1.0, max_iterations: 5, confidence: 0.999, rng_seed: 7 };
        let mut seen_a = Vec::new();
        let _ = ransac_core(
            10,
            3,
            &cfg,
            |s| {
                seen_a.push(s.to_vec());
                None::<()>
            },
            |_, _| f64::INFINITY,
        );
        let mut seen_b = Vec::new();
        let _ = ransac_core(
            10,
            3,
            &cfg,
            |s| {
                seen_b.push(s.to_vec());
                None::<()>
            },
            |_, _| f64::INFINITY,
        );
        assert_eq!(seen_a, seen_b);
        assert_eq!(seen_a.len(), 5);
        // Streams differ between iterations.
        assert_ne!(seen_a[0], seen_a[1]);
    }

    #[test]
    fn all_hypotheses_failing_reports_no_consensus() {
        let cfg = RansacConfig { inlier_threshold: 1.0, max_iterations: 3, confidence: 0.999, rng_seed: 1 };
        let out = ransac_core::<()>(5, 3, &cfg, |_| None, |_, _| 0.0);
        assert!(matches!(out, Err(FitError::NoConsensus { needed: 3 })));
    }

    #[test]
    fn too_few_items_is_rejected() {
        let cfg = RansacConfig { inlier_threshold: 1.0, max_iterations: 3, confidence: 0.999, rng_seed: 1 };
        let out = ransac_core::<()>(2, 3, &cfg, |_| Some(()), |_, _| 0.0);
        assert!(matches!(out, Err(FitError::TooFewItems { needed: 3, got: 2 })));
    }
}
