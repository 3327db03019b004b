use serde::Serialize;

use super::{CorrespondenceSet, FitError};
use crate::geometry::Homography;

/// Forward transfer statistics of a homography over a correspondence set.
///
/// `per_pair` keeps one entry per input pair in order, with
/// `f64::INFINITY` for pairs the homography maps to infinity; those pairs
/// are excluded from `mean`, `median`, and `max`, and `finite_count` says
/// how many contributed.
#[derive(Debug, Clone, Serialize)]
pub struct ReprojectionStats {
    pub mean: f64,
    pub median: f64,
    pub max: f64,
    pub per_pair: Vec<f64>,
    pub finite_count: usize,
}

/// Forward reprojection error `|H p_current - p_previous|` for every pair.
pub fn reprojection_error(
    h: &Homography,
    c: &CorrespondenceSet,
) -> Result<ReprojectionStats, FitError> {
    if c.is_empty() {
        return Err(FitError::TooFewItems { needed: 1, got: 0 });
    }
    let per_pair: Vec<f64> = c
        .pairs()
        .iter()
        .map(|pair| {
            h.apply(pair.current)
                .map_or(f64::INFINITY, |q| (q - pair.previous).norm())
        })
        .collect();
    let mut finite: Vec<f64> = per_pair.iter().copied().filter(|e| e.is_finite()).collect();
    if finite.is_empty() {
        return Err(FitError::Degenerate(
            "every correspondence maps to infinity".into(),
        ));
    }
    finite.sort_by(f64::total_cmp);
    let n = finite.len();
    let mean = finite.iter().sum::<f64>() / n as f64;
    let median = if n % 2 == 1 {
        finite[n / 2]
    } else {
        0.5 * (finite[n / 2 - 1] + finite[n / 2])
    };
    let max = finite[n - 1];
    Ok(ReprojectionStats { mean, median, max, per_pair, finite_count: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitting::Correspondence;
    use approx::assert_abs_diff_eq;
    use nalgebra::{Matrix3, Vector2};

    fn pair(cx: f64, cy: f64, px: f64, py: f64) -> Correspondence {
        Correspondence { current: Vector2::new(cx, cy), previous: Vector2::new(px, py) }
    }

    #[test]
    fn identity_on_matching_pairs_is_exactly_zero() {
        let set = CorrespondenceSet::new(vec![
            pair(3.0, 4.0, 3.0, 4.0),
            pair(10.0, 2.0, 10.0, 2.0),
            pair(7.5, 9.25, 7.5, 9.25),
        ])
        .unwrap();
        let stats = reprojection_error(&Homography::identity(), &set).unwrap();
        assert_eq!(stats.mean, 0.0);
        assert_eq!(stats.median, 0.0);
        assert_eq!(stats.max, 0.0);
        assert_eq!(stats.per_pair, vec![0.0, 0.0, 0.0]);
        assert_eq!(stats.finite_count, 3);
    }

    #[test]
    fn unit_offset_pairs_score_one() {
        let set = CorrespondenceSet::new(vec![
            pair(3.0, 4.0, 4.0, 4.0),
            pair(10.0, 2.0, 10.0, 3.0),
        ])
        .unwrap();
        let stats = reprojection_error(&Homography::identity(), &set).unwrap();
        assert_abs_diff_eq!(stats.mean, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(stats.median, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(stats.max, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn stats_match_brute_force() {
        let h = Homography::from_matrix(Matrix3::new(
            1.01, 0.02, 1.5, -0.01, 0.99, -2.0, 1e-4, -5e-5, 1.0,
        ))
        .unwrap();
        let pairs = vec![
            pair(5.0, 5.0, 6.0, 4.0),
            pair(50.0, 20.0, 52.0, 18.0),
            pair(80.0, 60.0, 81.0, 59.0),
            pair(20.0, 90.0, 19.0, 92.0),
        ];
        let set = CorrespondenceSet::new(pairs.clone()).unwrap();
        let stats = reprojection_error(&h, &set).unwrap();
        let mut errs: Vec<f64> = pairs
            .iter()
            .map(|p| (h.apply(p.current).unwrap() - p.previous).norm())
            .collect();
        for (a, b) in stats.per_pair.iter().zip(errs.iter()) {
            assert_eq!(a, b);
        }
        errs.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(stats.mean, errs.iter().sum::<f64>() / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(stats.median, 0.5 * (errs[1] + errs[2]), epsilon = 1e-15);
        assert_eq!(stats.max, errs[3]);
        assert_eq!(stats.finite_count, 4);
    }

    #[test]
    fn pairs_at_infinity_are_listed_but_excluded() {
        // This projective map sends the line x = 1 to infinity.
        let h = Homography::from_matrix(Matrix3::new(
            1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 1.0,
        ))
        .unwrap();
        let set = CorrespondenceSet::new(vec![
            pair(1.0, 0.0, 0.0, 0.0),
            pair(3.0, 0.0, 1.5, 0.0),
        ])
        .unwrap();
        let stats = reprojection_error(&h, &set).unwrap();
        assert_eq!(stats.per_pair.len(), 2);
        assert!(stats.per_pair[0].is_infinite());
        assert_eq!(stats.finite_count, 1);
        assert!(stats.mean.is_finite() && stats.max.is_finite());
    }

    #[test]
    fn all_pairs_at_infinity_is_degenerate() {
        let h = Homography::from_matrix(Matrix3::new(
            1.0, 0.0, 0.0, 0.0, 1.0, 0.0, -1.0, 0.0, 1.0,
        ))
        .unwrap();
        let set = CorrespondenceSet::new(vec![pair(1.0, 0.0, 0.0, 0.0), pair(1.0, 5.0, 0.0, 5.0)])
            .unwrap();
        assert!(matches!(reprojection_error(&h, &set), Err(FitError::Degenerate(_))));
    }

    #[test]
    fn empty_set_is_rejected() {
        let set = CorrespondenceSet::new(Vec::new()).unwrap();
        assert!(matches!(
            reprojection_error(&Homography::identity(), &set),
            Err(FitError::TooFewItems { needed: 1, got: 0 })
        ));
    }

    #[test]
    fn odd_count_median_is_middle_element() {
        let set = CorrespondenceSet::new(vec![
            pair(0.0, 0.0, 3.0, 0.0),
            pair(1.0, 0.0, 1.0, 1.0),
            pair(2.0, 0.0, 2.0, 7.0),
        ])
        .unwrap();
        let stats = reprojection_error(&Homography::identity(), &set).unwrap();
        assert_eq!(stats.median, 3.0);
        assert_eq!(stats.max, 7.0);
    }
}
