//! Coarse-to-fine momentum descent over image pairs and sequences.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::geometry::{compose_homography, CameraIntrinsics, GroundPlane, Homography, Pose};
use crate::imaging::{
    homography_loss, photometric_loss, smoothness_loss, warp_by_depth, DepthMap, ImageBuffer,
    RoadMask,
};
use crate::metrics::Trajectory;

use super::gradient::context_gradient;
use super::loss::pair_context;
use super::state::{
    StateVector, IDX_GRID, IDX_PLANE_DH, IDX_PLANE_RX, IDX_PLANE_RZ, IDX_TRANSLATION,
};
use super::{
    total_loss, total_loss_gradient,
    context_loss, EstimationError, EstimatorConfig, LevelContext, LossBreakdown, RoadMasks,
    MIN_ROAD_COVERAGE,
};

/// Smallest image side allowed at the coarsest pyramid level; requested
/// levels that would shrink below this are not built.
pub(crate) const MIN_LEVEL_DIM: usize = 16;

/// One optimizer iteration of the loss trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    /// Pyramid level (0 = full resolution).
    pub level: usize,
    /// Iteration index within the level.
    pub iteration: usize,
    /// Step size the candidate was taken with.
    pub step: f64,
    /// Candidate loss (the accepted loss when `accepted`).
    pub loss: f64,
    pub accepted: bool,
}

/// Converged pair estimate, reported in metric scale: the pose maps
/// current-frame points into the previous frame, the plane carries height
/// exactly `camera_height`, and `homography` is the plane-induced
/// homography of exactly this pose and plane.
#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub pose: Pose,
    pub plane: GroundPlane,
    pub depth: DepthMap,
    pub homography: Homography,
    pub breakdown: LossBreakdown,
    /// Corrected plane height before scale recovery (`h_t`).
    pub estimated_height: f64,
    /// Total accepted-or-rejected iterations over all levels.
    pub iterations: usize,
    /// The finest level reached its convergence criterion.
    pub converged: bool,
    /// The loss left the trust region (only possible before any descent,
    /// when the initial evaluation is already unusable).
    pub diverged: bool,
    /// The homography term was requested (`xi > 0`) but dropped: masks
    /// missing, road coverage under [`MIN_ROAD_COVERAGE`], or the term
    /// unevaluable at the solution.
    pub homography_term_dropped: bool,
    /// Per-iteration loss trace, coarse levels first.
    pub trace: Vec<TraceRow>,
    /// Raw final state (un-rescaled), usable to warm-start the next pair.
    pub state: StateVector,
}

/// Serializable summary of an [`EstimationResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub schema_version: u32,
    /// Row-major `[R | t]` (12 floats).
    pub pose: [f64; 12],
    /// `[nx, ny, nz, h]`.
    pub plane: [f64; 4],
    /// Row-major homography, unnormalized.
    pub homography: [f64; 9],
    pub loss: LossBreakdown,
    pub estimated_height: f64,
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    pub homography_term_dropped: bool,
}

impl EstimationResult {
    pub fn report(&self) -> EstimationReport {
        let r = self.pose.rotation_matrix();
        let t = self.pose.translation();
        let mut pose = [0.0; 12];
        for row in 0..3 {
            for col in 0..3 {
                pose[row * 4 + col] = r[(row, col)];
            }
            pose[row * 4 + 3] = t[row];
        }
        let n = self.plane.normal();
        let hm = self.homography.matrix();
        let mut homography = [0.0; 9];
        for row in 0..3 {
            for col in 0..3 {
                homography[row * 3 + col] = hm[(row, col)];
            }
        }
        EstimationReport {
            schema_version: 1,
            pose,
            plane: [n.x, n.y, n.z, self.plane.height()],
            homography,
            loss: self.breakdown,
            estimated_height: self.estimated_height,
            iterations: self.iterations,
            converged: self.converged,
            diverged: self.diverged,
            homography_term_dropped: self.homography_term_dropped,
        }
    }
}

/// A chained sequence estimate: absolute world-to-camera trajectory (first
/// pose identity) plus every pairwise result in order.
#[derive(Debug, Clone)]
pub struct SequenceResult {
    pub trajectory: Trajectory,
    pub pairs: Vec<EstimationResult>,
}

pub(crate) struct DescentOutcome {
    pub iterations: usize,
    pub converged: bool,
    pub diverged: bool,
    #[allow(dead_code)]
    pub final_loss: f64,
}

/// Momentum gradient descent with backtracking, generic over the loss and
/// gradient evaluations (an unevaluable loss reads as infinity; an
/// unevaluable gradient stops the level).
///
/// Steps that do not decrease the loss are rejected: the step size shrinks
/// by `step_decay` and the momentum resets. Accepted steps grow the step
/// size slightly (capped at 10x the initial). A level converges after two
/// consecutive accepted decreases below `convergence_tol` relative to the
/// loss, or when the step size collapses below `1e-12` of the initial (a
/// stall at a kink of the piecewise-smooth loss — the iterate is as good
/// as it gets). It diverges if the loss ever exceeds 10x its initial
/// value; with monotone acceptance and nonnegative losses that cannot
/// happen, so the guard only fires when the initial evaluation is already
/// non-finite (kept as a defensive contract, exercised with synthetic
/// losses in tests).
pub(crate) fn descend<L, G>(
    state: &mut StateVector,
    mut loss: L,
    mut gradient: G,
    cfg: &EstimatorConfig,
    level: usize,
    trace: &mut Vec<TraceRow>,
) -> DescentOutcome
where
    L: FnMut(&StateVector) -> f64,
    G: FnMut(&StateVector) -> Option<DVector<f64>>,
{
    let initial_loss = loss(state);
    if !initial_loss.is_finite() {
        return DescentOutcome {
            iterations: 0,
            converged: false,
            diverged: true,
            final_loss: initial_loss,
        };
    }
    let scales = step_scale_vector(state, cfg);
    let mut velocity = DVector::zeros(state.dim());
    let mut step = cfg.initial_step;
    let mut current = initial_loss;
    let mut grad_cache: Option<DVector<f64>> = None;
    let mut small_decreases = 0usize;
    let mut converged = false;
    let mut diverged = false;
    let mut iterations = 0usize;

    for iteration in 0..cfg.max_iterations {
        if grad_cache.is_none() {
            let Some(g) = gradient(state).filter(|g| g.iter().all(|v| v.is_finite())) else {
                diverged = true;
                break;
            };
            grad_cache = Some(g);
        }
        let g = grad_cache.as_ref().expect("gradient cached above");
        velocity *= cfg.momentum;
        for i in 0..velocity.len() {
            velocity[i] -= step * scales[i] * g[i];
        }
        let mut params = state.params().clone();
        params += &velocity;
        let candidate =
            StateVector::from_params(params, state.grid_width(), state.grid_height())
                .expect("candidate keeps the grid shape");
        let candidate_loss = loss(&candidate);
        let accepted = candidate_loss.is_finite() && candidate_loss <= current;
        trace.push(TraceRow { level, iteration, step, loss: candidate_loss, accepted });
        iterations = iteration + 1;
        if accepted {
            let decrease = current - candidate_loss;
            *state = candidate;
            current = candidate_loss;
            grad_cache = None;
            step = (step * 1.1).min(cfg.initial_step * 10.0);
            if current > 10.0 * initial_loss {
                diverged = true;
                break;
            }
            if decrease <= cfg.convergence_tol * current.abs().max(1e-12) {
                small_decreases += 1;
                if small_decreases >= 2 {
                    converged = true;
                    break;
                }
            } else {
                small_decreases = 0;
            }
        } else {
            velocity.fill(0.0);
            step *= cfg.step_decay;
            if step < cfg.initial_step * 1e-12 {
                converged = true;
                break;
            }
        }
    }
    DescentOutcome { iterations, converged, diverged, final_loss: current }
}

fn step_scale_vector(state: &StateVector, cfg: &EstimatorConfig) -> DVector<f64> {
    let s = &cfg.step_scales;
    let mut scales = DVector::from_element(state.dim(), s.grid);
    for i in 0..3 {
        scales[i] = s.rotation;
        scales[IDX_TRANSLATION + i] = s.translation;
    }
    scales[IDX_PLANE_RX] = s.plane_rotation;
    scales[IDX_PLANE_RZ] = s.plane_rotation;
    scales[IDX_PLANE_DH] = s.plane_height;
    debug_assert_eq!(IDX_GRID, 9);
    scales
}

/// One pyramid level's owned data.
struct PyramidLevel {
    current: ImageBuffer,
    previous: ImageBuffer,
    k: CameraIntrinsics,
    /// `(previous, current)` road masks, present only when the homography
    /// term is active for the pair.
    masks: Option<(RoadMask, RoadMask)>,
}

/// Estimates pose, plane, and depth for one image pair starting from the
/// plane-seeded initial state. See [`estimate_pair_with_init`].
pub fn estimate_pair(
    previous: &ImageBuffer,
    current: &ImageBuffer,
    masks: Option<RoadMasks<'_>>,
    k: &CameraIntrinsics,
    cfg: &EstimatorConfig,
) -> Result<EstimationResult, EstimationError> {
    cfg.validate()?;
    let init = StateVector::initial(k, cfg)?;
    estimate_pair_with_init(previous, current, masks, k, cfg, init)
}

/// Estimates pose, plane, and depth for one image pair from a caller-chosen
/// initial state (e.g. the previous pair's solution), by coarse-to-fine
/// minimization of [`total_loss`](super::total_loss).
///
/// The homography term participates when `xi > 0`, masks are given, and
/// both masks cover at least [`MIN_ROAD_COVERAGE`] of the frame; otherwise
/// it is dropped and the result flagged (`homography_term_dropped`). At
/// coarse levels the conservatively downscaled masks must themselves keep
/// that coverage, so the term can be inactive at a coarse level yet active
/// at full resolution. With `xi == 0` masks are never read and the flag
/// stays clear. Deterministic: identical inputs and config give
/// bit-identical results.
pub fn estimate_pair_with_init(
    previous: &ImageBuffer,
    current: &ImageBuffer,
    masks: Option<RoadMasks<'_>>,
    k: &CameraIntrinsics,
    cfg: &EstimatorConfig,
    init: StateVector,
) -> Result<EstimationResult, EstimationError> {
    cfg.validate()?;
    pair_context(current, previous, masks, k, cfg)?;
    if init.grid_width() != cfg.grid_width || init.grid_height() != cfg.grid_height {
        return Err(EstimationError::DimensionMismatch(format!(
            "initial state grid is {}x{}, config wants {}x{}",
            init.grid_width(),
            init.grid_height(),
            cfg.grid_width,
            cfg.grid_height
        )));
    }

    let coverage_ok = masks.as_ref().is_some_and(|m| {
        m.previous.fraction() >= MIN_ROAD_COVERAGE && m.current.fraction() >= MIN_ROAD_COVERAGE
    });
    let pair_active = cfg.xi > 0.0 && masks.is_some() && coverage_ok;
    let mut homography_term_dropped = cfg.xi > 0.0 && !pair_active;

    // Pyramid: factor-2 levels, stopping before any side drops under
    // MIN_LEVEL_DIM.
    let mut levels = vec![PyramidLevel {
        current: current.clone(),
        previous: previous.clone(),
        k: *k,
        masks: if pair_active {
            masks.map(|m| (m.previous.clone(), m.current.clone()))
        } else {
            None
        },
    }];
    while levels.len() < cfg.pyramid_levels {
        let last = levels.last().expect("at least the base level");
        let (nw, nh) = (
            (last.current.width() / 2).max(1),
            (last.current.height() / 2).max(1),
        );
        if nw.min(nh) < MIN_LEVEL_DIM {
            break;
        }
        let next = PyramidLevel {
            current: last.current.downscale_half(),
            previous: last.previous.downscale_half(),
            k: CameraIntrinsics::new(
                last.k.fx * 0.5,
                last.k.fy * 0.5,
                (last.k.cx + 0.5) * 0.5 - 0.5,
                (last.k.cy + 0.5) * 0.5 - 0.5,
                nw,
                nh,
            )?,
            masks: last
                .masks
                .as_ref()
                .map(|(p, c)| (p.downscale_half(), c.downscale_half())),
        };
        levels.push(next);
    }

    let mut state = init;
    let mut trace = Vec::new();
    let mut iterations = 0usize;
    let mut diverged = false;
    let mut finest_converged = false;
    for level_index in (0..levels.len()).rev() {
        let level = &levels[level_index];
        let level_masks = level.masks.as_ref().and_then(|(p, c)| {
            (p.fraction() >= MIN_ROAD_COVERAGE && c.fraction() >= MIN_ROAD_COVERAGE)
                .then_some(RoadMasks { previous: p, current: c })
        });
        let ctx = LevelContext {
            current: &level.current,
            previous: &level.previous,
            k: &level.k,
            masks: level_masks,
        };
        let outcome = descend(
            &mut state,
            |s| context_loss(s, &ctx, cfg).map_or(f64::INFINITY, |b| b.total),
            |s| context_gradient(s, &ctx, cfg).ok(),
            cfg,
            level_index,
            &mut trace,
        );
        iterations += outcome.iterations;
        if outcome.diverged {
            diverged = true;
            break;
        }
        if level_index == 0 {
            finest_converged = outcome.converged;
        }
    }

    // Full-resolution report of the final state. The photometric and
    // smoothness terms must be evaluable (a state that breaks them is an
    // honest error); a homography term that became unevaluable is dropped
    // and flagged instead.
    let (w, h) = (current.width(), current.height());
    let decoded = state.decode(w, h, cfg.camera_height)?;
    let recon = warp_by_depth(previous, k, &decoded.pose_adjusted, &decoded.depth_adjusted)?;
    let photometric = photometric_loss(current, &recon, cfg.alpha)?;
    let smoothness =
        smoothness_loss(&decoded.depth_adjusted, current, cfg.smoothness_target)?;
    let homography_matrix =
        compose_homography(k, &decoded.pose_adjusted, &decoded.plane_adjusted)?;
    let homography_value = if pair_active {
        let m = masks.expect("pair_active implies masks");
        match homography_loss(current, previous, &homography_matrix, m.current, m.previous) {
            Ok(value) => Some(value),
            Err(_) => {
                homography_term_dropped = true;
                None
            }
        }
    } else {
        None
    };
    let height_penalty =
        cfg.height_penalty.map(|_| (decoded.height_raw - cfg.camera_height).abs());
    let mut total = cfg.mu * photometric + cfg.lambda * smoothness;
    if let Some(value) = homography_value {
        total += cfg.xi * value;
    }
    if let (Some(weight), Some(value)) = (cfg.height_penalty, height_penalty) {
        total += weight * value;
    }

    Ok(EstimationResult {
        pose: decoded.pose_adjusted,
        plane: decoded.plane_adjusted,
        depth: decoded.depth_adjusted,
        homography: homography_matrix,
        breakdown: LossBreakdown {
            photometric,
            smoothness,
            homography: homography_value,
            height_penalty,
            total,
        },
        estimated_height: decoded.height_raw,
        iterations,
        converged: finest_converged && !diverged,
        diverged,
        homography_term_dropped,
        trace,
        state,
    })
}

/// Estimates a whole sequence by chaining pairwise estimates: the first
/// pose is the identity and `abs[j] = rel_j^-1 o abs[j-1]` (world-to-camera
/// convention). With `warm_start` on, each pair starts from the previous
/// pair's raw solution. Non-converged pairs are chained anyway and stay
/// visible through their flags.
pub fn estimate_sequence(
    frames: &[ImageBuffer],
    masks: Option<&[RoadMask]>,
    k: &CameraIntrinsics,
    cfg: &EstimatorConfig,
) -> Result<SequenceResult, EstimationError> {
    cfg.validate()?;
    if frames.len() < 2 {
        return Err(EstimationError::SequenceTooShort { frames: frames.len() });
    }
    if let Some(m) = masks {
        if m.len() != frames.len() {
            return Err(EstimationError::DimensionMismatch(format!(
                "{} masks for {} frames",
                m.len(),
                frames.len()
            )));
        }
    }
    let mut absolute = vec![Pose::identity()];
    let mut pairs: Vec<EstimationResult> = Vec::with_capacity(frames.len() - 1);
    for j in 1..frames.len() {
        let pair_masks =
            masks.map(|m| RoadMasks { previous: &m[j - 1], current: &m[j] });
        let init = match pairs.last() {
            Some(last) if cfg.warm_start => last.state.clone(),
            _ => StateVector::initial(k, cfg)?,
        };
        let result =
            estimate_pair_with_init(&frames[j - 1], &frames[j], pair_masks, k, cfg, init)?;
        absolute.push(result.pose.inverse().compose(&absolute[j - 1]));
        pairs.push(result);
    }
    let trajectory = Trajectory::from_poses(absolute)
        .expect("a sequence of >= 2 frames yields a nonempty trajectory");
    Ok(SequenceResult { trajectory, pairs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::relative_pose;
    use crate::synthscene::{render, test_fixtures};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    /// Two rendered frames at 64x48 for fast optimizer tests.
    struct PairData {
        k: CameraIntrinsics,
        prev: crate::synthscene::RenderedFrame,
        cur: crate::synthscene::RenderedFrame,
        pose_gt: Pose,
    }

    fn small_pair(length: f64) -> PairData {
        let mut spec = test_fixtures::straight_scene(2, length);
        let k0 = spec.intrinsics;
        spec.intrinsics = CameraIntrinsics::new(
            k0.fx * 0.5,
            k0.fy * 0.5,
            (k0.cx + 0.5) * 0.5 - 0.5,
            (k0.cy + 0.5) * 0.5 - 0.5,
            64,
            48,
        )
        .unwrap();
        let prev = render(&spec, 0).unwrap();
        let cur = render(&spec, 1).unwrap();
        let pose_gt = relative_pose(&prev.pose, &cur.pose);
        PairData { k: spec.intrinsics, prev, cur, pose_gt }
    }

    fn fast_config() -> EstimatorConfig {
        EstimatorConfig {
            grid_width: 8,
            grid_height: 6,
            pyramid_levels: 2,
            max_iterations: 60,
            ..EstimatorConfig::new(1.5)
        }
    }

    #[test]
    fn scratch_descent_trace() {
        let data = small_pair(0.3);
        let cfg = EstimatorConfig { max_iterations: 30, pyramid_levels: 1, ..fast_config() };
        let masks = RoadMasks { previous: &data.prev.mask, current: &data.cur.mask };
        let res = estimate_pair(&data.prev.image, &data.cur.image, Some(masks), &data.k, &cfg)
            .unwrap();
        for row in res.trace.iter().take(30) {
            println!(
                "L{} it{:>3} step {:>12.5e} loss {:>18.12} {}",
                row.level, row.iteration, row.step, row.loss,
                if row.accepted { "ACCEPT" } else { "reject" }
            );
        }
        // Gradient at init, per block.
        let init = StateVector::initial(&data.k, &cfg).unwrap();
        let g = total_loss_gradient(
            &init, &data.cur.image, &data.prev.image, Some(masks), &data.k, &cfg,
        ).unwrap();
        let rot = g.rows(0, 3).norm();
        let tr = g.rows(3, 3).norm();
        let plane = g.rows(6, 3).norm();
        let grid = g.rows(9, g.len() - 9).norm();
        println!("grad norms: rot {rot:.4e} trans {tr:.4e} plane {plane:.4e} grid {grid:.4e}");
        let l0 = total_loss(&init, &data.cur.image, &data.prev.image, Some(masks), &data.k, &cfg).unwrap();
        println!("loss at init: {:?}", l0);
        // Probe the loss along -g at several step sizes.
        for exp in [-8.0f64, -7.0, -6.0, -5.0, -4.0, -3.0] {
            let s = 10.0f64.powf(exp);
            let mut probe_params = init.params().clone();
            for i in 0..probe_params.len() { probe_params[i] -= s * g[i]; }
            let probe = StateVector::from_params(probe_params, init.grid_width(), init.grid_height()).unwrap();
            match total_loss(&probe, &data.cur.image, &data.prev.image, Some(masks), &data.k, &cfg) {
                Ok(b) => println!("step 1e{exp:+.0}: total {:.12} (delta {:+.3e})", b.total, b.total - l0.total),
                Err(e) => println!("step 1e{exp:+.0}: ERR {e}"),
            }
        }
        panic!("scratch");
    }

    #[test]
    fn identical_frames_estimate_to_the_identity_pose() {
        // One rendered frame estimated against itself.
        let data = small_pair(0.3);
        let cfg = EstimatorConfig { max_iterations: 40, ..fast_config() };
        let masks = RoadMasks { previous: &data.prev.mask, current: &data.prev.mask };
        let res = estimate_pair(&data.prev.image, &data.prev.image, Some(masks), &data.k, &cfg)
            .unwrap();
        assert!(!res.diverged);
        assert!(
            res.pose.rotation_angle() < 1e-3,
            "rotation {} rad",
            res.pose.rotation_angle()
        );
        assert!(
            res.pose.translation().norm() < 1e-3,
            "translation {} m",
            res.pose.translation().norm()
        );
        assert_eq!(res.plane.height(), 1.5);
    }

    #[test]
    fn straight_pair_recovers_translation_and_rotation() {
        let data = small_pair(0.3);
        let cfg = EstimatorConfig { max_iterations: 120, pyramid_levels: 2, ..fast_config() };
        let masks = RoadMasks { previous: &data.prev.mask, current: &data.cur.mask };
        let res = estimate_pair(&data.prev.image, &data.cur.image, Some(masks), &data.k, &cfg)
            .unwrap();
        assert!(!res.diverged);
        let t_est = res.pose.translation();
        let t_gt = data.pose_gt.translation();
        let rot_err = relative_pose(&res.pose, &data.pose_gt).rotation_angle();
        assert!(
            rot_err < 0.5 * PI / 180.0,
            "rotation error {:.4} deg",
            rot_err * 180.0 / PI
        );
        let mag_err = (t_est.norm() - t_gt.norm()).abs() / t_gt.norm();
        assert!(
            mag_err < 0.10,
            "translation magnitude error {:.1}% (est {:.4}, gt {:.4})",
            mag_err * 100.0,
            t_est.norm(),
            t_gt.norm()
        );
        let dir_cos = t_est.dot(&t_gt) / (t_est.norm() * t_gt.norm());
        assert!(
            dir_cos > (5.0_f64 * PI / 180.0).cos(),
            "translation direction off by {:.2} deg",
            dir_cos.clamp(-1.0, 1.0).acos() * 180.0 / PI
        );
    }

    #[test]
    fn results_are_bitwise_deterministic() {
        let data = small_pair(0.3);
        let cfg = EstimatorConfig { max_iterations: 12, ..fast_config() };
        let masks = RoadMasks { previous: &data.prev.mask, current: &data.cur.mask };
        let a = estimate_pair(&data.prev.image, &data.cur.image, Some(masks), &data.k, &cfg)
            .unwrap();
        let b = estimate_pair(&data.prev.image, &data.cur.image, Some(masks), &data.k, &cfg)
            .unwrap();
        assert_eq!(a.state.params(), b.state.params());
        assert_eq!(a.pose, b.pose);
        assert_eq!(a.breakdown, b.breakdown);
        assert_eq!(a.trace, b.trace);
    }

    #[test]
    fn zero_xi_results_do_not_depend_on_masks() {
        let data = small_pair(0.3);
        let cfg = EstimatorConfig { xi: 0.0, max_iterations: 10, ..fast_config() };
        let masks = RoadMasks { previous: &data.prev.mask, current: &data.cur.mask };
        let flipped = RoadMask::from_fn(64, 48, |x, y| !data.prev.mask.get(x, y) || y == 0);
        let other = RoadMasks { previous: &flipped, current: &flipped };
        let with = estimate_pair(&data.prev.image, &data.cur.image, Some(masks), &data.k, &cfg)
            .unwrap();
        let odd = estimate_pair(&data.prev.image, &data.cur.image, Some(other), &data.k, &cfg)
            .unwrap();
        let none =
            estimate_pair(&data.prev.image, &data.cur.image, None, &data.k, &cfg).unwrap();
        assert_eq!(with.state.params(), none.state.params());
        assert_eq!(odd.state.params(), none.state.params());
        assert_eq!(with.breakdown, none.breakdown);
        assert!(!with.homography_term_dropped);
        assert!(with.breakdown.homography.is_none());
    }

    #[test]
    fn scarce_road_coverage_drops_the_homography_term() {
        let data = small_pair(0.3);
        let cfg = EstimatorConfig { max_iterations: 6, ..fast_config() };
        // ~0.3% coverage: a single 3x3 patch.
        let tiny = RoadMask::from_fn(64, 48, |x, y| (30..33).contains(&x) && (40..43).contains(&y));
        let masks = RoadMasks { previous: &tiny, current: &tiny };
        let res = estimate_pair(&data.prev.image, &data.cur.image, Some(masks), &data.k, &cfg)
            .unwrap();
        assert!(res.homography_term_dropped);
        assert!(res.breakdown.homography.is_none());
        // The homography of the estimate is still reported.
        let recomputed = compose_homography(&data.k, &res.pose, &res.plane).unwrap();
        assert_eq!(res.homography.matrix(), recomputed.matrix());
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let data = small_pair(0.3);
        let cfg = EstimatorConfig {
            max_iterations: 2,
            pyramid_levels: 1,
            convergence_tol: 0.0,
            ..fast_config()
        };
        let res =
            estimate_pair(&data.prev.image, &data.cur.image, None, &data.k, &cfg).unwrap();
        assert!(!res.converged);
        assert!(!res.diverged);
        assert_eq!(res.iterations, 2);
        assert_eq!(res.trace.len(), 2);
    }

    #[test]
    fn scale_coherence_of_the_reported_quantities() {
        let data = small_pair(0.3);
        let cfg = EstimatorConfig { max_iterations: 20, ..fast_config() };
        let masks = RoadMasks { previous: &data.prev.mask, current: &data.cur.mask };
        let res = estimate_pair(&data.prev.image, &data.cur.image, Some(masks), &data.k, &cfg)
            .unwrap();
        // The reported plane sits exactly at the calibrated height, and the
        // reported homography is exactly the one its pose and plane induce.
        assert_eq!(res.plane.height(), cfg.camera_height);
        let recomputed = compose_homography(&data.k, &res.pose, &res.plane).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_relative_eq!(
                    res.homography.matrix()[(i, j)],
                    recomputed.matrix()[(i, j)],
                    epsilon = 1e-12,
                    max_relative = 1e-12
                );
            }
        }
        // Raw height and scale stay linked: depth * h_t/h_c = raw depth.
        let raw = res.state.raw_depth(64, 48).unwrap();
        let ratio = res.depth.raw(10, 40) / raw.raw(10, 40);
        assert_relative_eq!(
            ratio,
            cfg.camera_height / res.estimated_height,
            epsilon = 1e-12
        );
    }

    #[test]
    fn descent_rejects_uphill_steps_and_keeps_the_loss_monotone() {
        let data = small_pair(0.3);
        let cfg = EstimatorConfig { max_iterations: 25, pyramid_levels: 1, ..fast_config() };
        let res =
            estimate_pair(&data.prev.image, &data.cur.image, None, &data.k, &cfg).unwrap();
        let accepted: Vec<f64> =
            res.trace.iter().filter(|r| r.accepted).map(|r| r.loss).collect();
        assert!(!accepted.is_empty(), "no accepted iterations");
        for pair in accepted.windows(2) {
            assert!(pair[1] <= pair[0], "accepted loss increased: {pair:?}");
        }
    }

    #[test]
    fn descent_flags_divergence_per_contract() {
        // With monotone acceptance a nonnegative loss can never exceed 10x
        // its initial value, so the guard is exercised with a synthetic
        // loss that starts negative (where "10x initial" is the larger
        // number). The first accepted step then trips the guard.
        let cfg = EstimatorConfig {
            grid_width: 2,
            grid_height: 2,
            max_iterations: 10,
            ..EstimatorConfig::new(1.5)
        };
        let mut state = StateVector::new(2, 2).unwrap();
        let mut trace = Vec::new();
        let outcome = descend(
            &mut state,
            |s| -1.0 - s.param(0),
            |s| {
                let mut g = DVector::zeros(s.dim());
                g[0] = -1.0;
                Some(g)
            },
            &cfg,
            0,
            &mut trace,
        );
        assert!(outcome.diverged);
        assert!(!outcome.converged);

        // A non-finite initial loss is flagged without any iterations.
        let mut state2 = StateVector::new(2, 2).unwrap();
        let mut trace2 = Vec::new();
        let outcome2 = descend(
            &mut state2,
            |_| f64::INFINITY,
            |s| Some(DVector::zeros(s.dim())),
            &cfg,
            0,
            &mut trace2,
        );
        assert!(outcome2.diverged);
        assert_eq!(outcome2.iterations, 0);
        assert!(trace2.is_empty());
    }

    #[test]
    fn sequence_chains_pairwise_poses_into_the_trajectory() {
        let mut spec = test_fixtures::straight_scene(3, 0.6);
        let k0 = spec.intrinsics;
        spec.intrinsics = CameraIntrinsics::new(
            k0.fx * 0.5,
            k0.fy * 0.5,
            (k0.cx + 0.5) * 0.5 - 0.5,
            (k0.cy + 0.5) * 0.5 - 0.5,
            64,
            48,
        )
        .unwrap();
        let frames: Vec<_> = (0..3).map(|i| render(&spec, i).unwrap()).collect();
        let images: Vec<ImageBuffer> = frames.iter().map(|f| f.image.clone()).collect();
        let masks: Vec<RoadMask> = frames.iter().map(|f| f.mask.clone()).collect();
        let cfg = EstimatorConfig { max_iterations: 15, ..fast_config() };
        let res =
            estimate_sequence(&images, Some(&masks), &spec.intrinsics, &cfg).unwrap();
        assert_eq!(res.trajectory.len(), 3);
        assert_eq!(res.pairs.len(), 2);
        assert_eq!(res.trajectory.poses()[0], Pose::identity());
        for j in 1..3 {
            let rel = relative_pose(&res.trajectory.poses()[j - 1], &res.trajectory.poses()[j]);
            let diff = relative_pose(&rel, &res.pairs[j - 1].pose);
            assert!(
                diff.rotation_angle() < 1e-10
                    && diff.translation().norm() < 1e-10,
                "chaining mismatch at {j}"
            );
        }
        // Errors for degenerate inputs.
        assert!(matches!(
            estimate_sequence(&images[..1], None, &spec.intrinsics, &cfg),
            Err(EstimationError::SequenceTooShort { frames: 1 })
        ));
        assert!(estimate_sequence(&images, Some(&masks[..2]), &spec.intrinsics, &cfg).is_err());
    }

    #[test]
    fn report_serializes_the_result_consistently() {
        let data = small_pair(0.3);
        let cfg = EstimatorConfig { max_iterations: 8, ..fast_config() };
        let masks = RoadMasks { previous: &data.prev.mask, current: &data.cur.mask };
        let res = estimate_pair(&data.prev.image, &data.cur.image, Some(masks), &data.k, &cfg)
            .unwrap();
        let report = res.report();
        assert_eq!(report.schema_version, 1);
        let r = res.pose.rotation_matrix();
        assert_eq!(report.pose[0], r[(0, 0)]);
        assert_eq!(report.pose[3], res.pose.translation().x);
        assert_eq!(report.pose[11], res.pose.translation().z);
        assert_eq!(report.plane[3], cfg.camera_height);
        assert_eq!(report.homography[8], res.homography.matrix()[(2, 2)]);
        let text = serde_json::to_string(&report).unwrap();
        let back: EstimationReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, report);
    }
}
