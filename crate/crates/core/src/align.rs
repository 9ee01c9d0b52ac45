//! Dense photometric registration: chains the exponential-map, grid
//! generator, projection, sampler and robust-loss layers end-to-end and
//! minimizes the resulting cost over SO3 or SE3 parameters.
//!
//! The cost for a pose `T` is the robustified photometric error
//!
//! ```text
//! C(T) = Σ_x mask(x) · ρ( I_ref(x) − I_live(π(T · p̂(x))) )
//! ```
//!
//! where `p̂(x)` lifts pixel x via inverse projection and the reference
//! depth (SE3 mode) or the unit-depth ray grid (SO3 mode, pure rotation).
//! The mask excludes pixels with invalid depth, near-zero transformed `w`,
//! or out-of-bounds samples, so those contribute exactly zero to both the
//! cost and the gradient.
//!
//! The gradient is assembled analytically from the per-layer backward
//! passes; the solver is first-order descent with a backtracking line
//! search, optionally wrapped in a factor-2 coarse-to-fine pyramid.

use nalgebra::{Matrix3, Vector2, Vector3};

use crate::camera::{
    grid_generator_3d, grid_generator_3d_backward, project_backward, project_with_epsilon,
    CameraIntrinsics, W_EPSILON,
};
use crate::error::{Error, Result};
use crate::grid::{ScalarGrid, VectorGrid};
use crate::lie::{
    compose_transform, rotation_block, se3_backward, se3_forward, so3_backward, so3_exp, Se3Params,
    TransformMatrix,
};
use crate::pyramid::{downsample_depth, downsample_image};
use crate::robust::{apply_rho_grid, RobustLoss};
use crate::sampler::{bilinear_sample, bilinear_sample_backward};

/// Pose parameterization of an alignment problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignMode {
    /// Pure rotation; 3 parameters, no depth needed.
    So3,
    /// Rotation and translation; 6 parameters, dense depth required.
    Se3,
}

impl AlignMode {
    pub fn param_len(self) -> usize {
        match self {
            AlignMode::So3 => 3,
            AlignMode::Se3 => 6,
        }
    }
}

/// Inputs of a dense alignment: the image pair, (for SE3) the reference
/// depth, the intrinsics and the robust loss.
#[derive(Debug, Clone)]
pub struct AlignmentProblem {
    pub ref_image: ScalarGrid,
    pub live_image: ScalarGrid,
    pub depth: Option<ScalarGrid>,
    pub intrinsics: CameraIntrinsics,
    pub loss: RobustLoss,
    pub mode: AlignMode,
}

impl AlignmentProblem {
    pub fn new(
        ref_image: ScalarGrid,
        live_image: ScalarGrid,
        depth: Option<ScalarGrid>,
        intrinsics: CameraIntrinsics,
        loss: RobustLoss,
        mode: AlignMode,
    ) -> Result<Self> {
        if !ref_image.same_shape(&live_image) {
            return Err(Error::shape(
                "AlignmentProblem::new",
                format!("{}x{}", ref_image.height(), ref_image.width()),
                format!("{}x{}", live_image.height(), live_image.width()),
            ));
        }
        match mode {
            AlignMode::Se3 => match &depth {
                None => {
                    return Err(Error::Config(
                        "SE3 alignment requires a reference depth map".to_string(),
                    ))
                }
                Some(d) if !d.same_shape(&ref_image) => {
                    return Err(Error::shape(
                        "AlignmentProblem::new (depth)",
                        format!("{}x{}", ref_image.height(), ref_image.width()),
                        format!("{}x{}", d.height(), d.width()),
                    ))
                }
                Some(_) => {}
            },
            AlignMode::So3 => {}
        }
        Ok(AlignmentProblem {
            ref_image,
            live_image,
            depth,
            intrinsics,
            loss,
            mode,
        })
    }

    pub fn param_len(&self) -> usize {
        self.mode.param_len()
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_len() {
            return Err(Error::ParamDomain(format!(
                "{:?} alignment needs {} parameters, got {}",
                self.mode,
                self.param_len(),
                params.len()
            )));
        }
        Ok(())
    }

    /// Pose transform for a parameter vector: `[R(v) | t]` in SE3 mode,
    /// `[R(v) | 0]` in SO3 mode.
    pub fn transform(&self, params: &[f64]) -> Result<TransformMatrix> {
        self.check_params(params)?;
        Ok(match self.mode {
            AlignMode::So3 => compose_transform(
                &so3_exp(&Vector3::new(params[0], params[1], params[2])),
                &Vector3::zeros(),
            ),
            AlignMode::Se3 => se3_forward(&Se3Params::from_slice(params)?),
        })
    }

    /// Depth map feeding the 3D grid generator: the stored reference depth
    /// in SE3 mode, the unit-depth ray grid in SO3 mode.
    fn effective_depth(&self) -> Result<ScalarGrid> {
        match self.mode {
            AlignMode::Se3 => Ok(self.depth.clone().expect("validated at construction")),
            AlignMode::So3 => {
                ScalarGrid::filled(self.ref_image.height(), self.ref_image.width(), 1.0)
            }
        }
    }
}

/// One accepted iteration of the descent loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub iter: usize,
    pub cost: f64,
    pub step: f64,
    pub valid_fraction: f64,
}

/// Final pose estimate with its convergence record.
#[derive(Debug, Clone)]
pub struct AlignmentResult {
    /// 3 (SO3) or 6 (SE3) final parameters.
    pub params: Vec<f64>,
    /// Cost history starting with the initial evaluation at iteration 0.
    pub cost_trace: Vec<TraceEntry>,
    /// True iff the relative-cost tolerance (or a stationary gradient)
    /// stopped the loop and the final cost did not exceed the initial one.
    pub converged: bool,
    /// Fraction of pixels contributing to the final cost.
    pub final_mask_fraction: f64,
}

/// Descent-loop configuration.
#[derive(Debug, Clone, Copy)]
pub struct AlignConfig {
    pub max_iters: usize,
    /// Relative cost-change tolerance: stop when |Δcost|/max(cost, 1e-12) < tol.
    pub tol: f64,
    /// Step size tried first at the first iteration; later iterations warm
    /// start from twice the last accepted step.
    pub initial_step: f64,
    /// Line-search halvings before declaring divergence.
    pub max_halvings: u32,
    /// Cap on the infinity norm of a single parameter update. Rotation
    /// parameters are periodic, so an uncapped search can wander to huge
    /// but geometrically equivalent vectors.
    pub max_step_norm: f64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            max_iters: 200,
            tol: 1e-8,
            initial_step: 1.0,
            max_halvings: 20,
            max_step_norm: 1.0,
        }
    }
}

/// Everything the chain produces in one forward evaluation.
struct ChainState {
    cost: f64,
    residuals: ScalarGrid,
    mask: ScalarGrid,
    /// Sampling coordinates in the live image (2 channels).
    coords: VectorGrid,
    /// Transformed 3D points, one per reference pixel.
    points: VectorGrid,
    valid_fraction: f64,
}

fn evaluate_chain(problem: &AlignmentProblem, params: &[f64]) -> Result<ChainState> {
    let transform = problem.transform(params)?;
    let depth = problem.effective_depth()?;
    let cloud = grid_generator_3d(&depth, &problem.intrinsics, &transform)?;

    let h = problem.ref_image.height();
    let w = problem.ref_image.width();
    let mut coords = VectorGrid::zeros(h, w, 2)?;
    let mut chain_valid = ScalarGrid::zeros(h, w)?;
    for r in 0..h {
        for c in 0..w {
            if !cloud.is_valid(r, c) {
                continue;
            }
            let p = cloud.point(r, c);
            match project_with_epsilon(&p, &problem.intrinsics, W_EPSILON) {
                Ok(pix) => {
                    coords.set(r, c, 0, pix.x);
                    coords.set(r, c, 1, pix.y);
                    chain_valid.set(r, c, 1.0);
                }
                Err(_) => {
                    // Behind or too near the camera plane: flagged out.
                    coords.set(r, c, 0, -1.0);
                    coords.set(r, c, 1, -1.0);
                }
            }
        }
    }

    let (warped, sample_mask) = bilinear_sample(&problem.live_image, &coords)?;
    let mut mask = ScalarGrid::zeros(h, w)?;
    let mut residuals = ScalarGrid::zeros(h, w)?;
    let mut valid_count = 0usize;
    for r in 0..h {
        for c in 0..w {
            let m = chain_valid.get(r, c) * sample_mask.get(r, c);
            mask.set(r, c, m);
            if m != 0.0 {
                valid_count += 1;
                residuals.set(r, c, problem.ref_image.get(r, c) - warped.get(r, c));
            }
        }
    }
    let (cost, _) = apply_rho_grid(&problem.loss, &residuals, &mask)?;
    Ok(ChainState {
        cost,
        residuals,
        mask,
        coords,
        points: cloud.points().clone(),
        valid_fraction: valid_count as f64 / (h * w) as f64,
    })
}

/// Robustified photometric cost at `params`, with the masked residual grid
/// and the mask itself.
pub fn photometric_cost(
    problem: &AlignmentProblem,
    params: &[f64],
) -> Result<(f64, ScalarGrid, ScalarGrid)> {
    let state = evaluate_chain(problem, params)?;
    Ok((state.cost, state.residuals, state.mask))
}

/// Analytic gradient of [`photometric_cost`] with respect to the pose
/// parameters, composed from the per-layer backward passes.
pub fn photometric_gradient(problem: &AlignmentProblem, params: &[f64]) -> Result<Vec<f64>> {
    let state = evaluate_chain(problem, params)?;
    let h = problem.ref_image.height();
    let w = problem.ref_image.width();

    // dC/dwarped = −mask·ψ(r); the loss layer returns mask·ψ(r).
    let (_, grad_residual) = apply_rho_grid(&problem.loss, &state.residuals, &state.mask)?;
    let mut grad_warped = ScalarGrid::zeros(h, w)?;
    for r in 0..h {
        for c in 0..w {
            grad_warped.set(r, c, -grad_residual.get(r, c));
        }
    }

    // Sampler backward: coordinate gradients (the live-image gradient is not
    // needed for pose estimation).
    let (_, grad_coords) =
        bilinear_sample_backward(&problem.live_image, &state.coords, &grad_warped)?;

    // Projection backward per valid pixel.
    let mut grad_points = VectorGrid::zeros(h, w, 3)?;
    for r in 0..h {
        for c in 0..w {
            if state.mask.get(r, c) == 0.0 {
                continue;
            }
            let point = Vector3::new(
                state.points.get(r, c, 0),
                state.points.get(r, c, 1),
                state.points.get(r, c, 2),
            );
            let g_pix = Vector2::new(grad_coords.get(r, c, 0), grad_coords.get(r, c, 1));
            let g_point = project_backward(&point, &problem.intrinsics, &g_pix)?;
            grad_points.set(r, c, 0, g_point.x);
            grad_points.set(r, c, 1, g_point.y);
            grad_points.set(r, c, 2, g_point.z);
        }
    }

    // Grid-generator backward accumulates the transform gradient.
    let depth = problem.effective_depth()?;
    let transform = problem.transform(params)?;
    let (grad_transform, _) =
        grid_generator_3d_backward(&depth, &problem.intrinsics, &transform, &grad_points)?;

    Ok(match problem.mode {
        AlignMode::So3 => {
            let v = Vector3::new(params[0], params[1], params[2]);
            let rot = so3_exp(&v);
            let grad_rot_block: Matrix3<f64> = rotation_block(&grad_transform);
            let g = so3_backward(&v, &rot, &grad_rot_block);
            vec![g.x, g.y, g.z]
        }
        AlignMode::Se3 => {
            let p = Se3Params::from_slice(params)?;
            let g = se3_backward(&p, &grad_transform);
            g.iter().copied().collect()
        }
    })
}

/// Observer invoked after every accepted iteration with the trace entry and
/// the current parameters.
pub type IterObserver<'a> = &'a mut dyn FnMut(&TraceEntry, &[f64]);

/// Gradient norm below which the current point is treated as stationary and
/// the loop stops converged.
const STATIONARY_GRAD: f64 = 1e-14;

/// The masked-sum cost has a degenerate global minimum where the pose
/// throws every sample out of bounds and the mask empties. The line search
/// therefore only accepts candidates that keep at least this ratio of the
/// valid-mask fraction measured at the initial parameters.
const MIN_VALID_RATIO: f64 = 0.5;

/// Gradient descent with a backtracking line search.
///
/// Each iteration halves the trial step until the cost strictly decreases
/// (up to `max_halvings` times); a line search that never decreases the cost
/// returns `converged = false` with the trace rather than an error.
pub fn align(
    problem: &AlignmentProblem,
    initial_params: &[f64],
    config: &AlignConfig,
) -> Result<AlignmentResult> {
    align_observed(problem, initial_params, config, None)
}

/// [`align`] with an optional per-iteration observer (used by the CLI to
/// dump residual images while iterating).
pub fn align_observed(
    problem: &AlignmentProblem,
    initial_params: &[f64],
    config: &AlignConfig,
    mut observer: Option<IterObserver<'_>>,
) -> Result<AlignmentResult> {
    if config.max_iters < 1 {
        return Err(Error::Config("max_iters must be at least 1".to_string()));
    }
    problem.check_params(initial_params)?;

    let mut params = initial_params.to_vec();
    let state = evaluate_chain(problem, &params)?;
    let initial_cost = state.cost;
    let fraction_floor = MIN_VALID_RATIO * state.valid_fraction;
    let mut cost = state.cost;
    let mut mask_fraction = state.valid_fraction;
    let mut trace = vec![TraceEntry {
        iter: 0,
        cost,
        step: 0.0,
        valid_fraction: mask_fraction,
    }];

    let mut converged = false;
    let mut step = config.initial_step;
    for iter in 1..=config.max_iters {
        let grad = photometric_gradient(problem, &params)?;
        let grad_inf = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if grad_inf < STATIONARY_GRAD {
            converged = true;
            break;
        }

        // Warm start from twice the last accepted step, capped so one
        // update cannot move the parameters further than max_step_norm.
        let step_cap = config.max_step_norm / grad_inf.max(1e-300);
        let mut trial = if iter == 1 { step } else { step * 2.0 };
        trial = trial.min(step_cap);
        let mut accepted = None;
        for _ in 0..=config.max_halvings {
            let candidate: Vec<f64> = params
                .iter()
                .zip(&grad)
                .map(|(p, g)| p - trial * g)
                .collect();
            let candidate_state = evaluate_chain(problem, &candidate)?;
            if candidate_state.cost < cost && candidate_state.valid_fraction >= fraction_floor {
                accepted = Some((candidate, candidate_state));
                break;
            }
            trial /= 2.0;
        }

        let (new_params, new_state) = match accepted {
            Some(a) => a,
            None => {
                // Divergence: the line search exhausted its halvings.
                converged = false;
                break;
            }
        };

        let delta = cost - new_state.cost;
        params = new_params;
        cost = new_state.cost;
        mask_fraction = new_state.valid_fraction;
        step = trial;
        let entry = TraceEntry {
            iter,
            cost,
            step,
            valid_fraction: mask_fraction,
        };
        trace.push(entry);
        if let Some(obs) = observer.as_mut() {
            obs(&entry, &params);
        }

        if delta / cost.max(1e-12) < config.tol {
            converged = true;
            break;
        }
    }

    Ok(AlignmentResult {
        params,
        cost_trace: trace,
        converged: converged && cost <= initial_cost,
        final_mask_fraction: mask_fraction,
    })
}

/// Coarse-to-fine alignment over a factor-2 pyramid with `levels` levels.
///
/// The coarsest level starts from `initial_params`; every finer level is
/// initialized from the previous level's result. Intrinsics are halved per
/// level; rotation and translation parameters transfer unchanged. Trace
/// iteration numbers continue across levels.
pub fn coarse_to_fine_align(
    problem: &AlignmentProblem,
    levels: usize,
    initial_params: &[f64],
    config: &AlignConfig,
) -> Result<AlignmentResult> {
    coarse_to_fine_align_observed(problem, levels, initial_params, config, None)
}

/// [`coarse_to_fine_align`] with an optional per-iteration observer.
pub fn coarse_to_fine_align_observed(
    problem: &AlignmentProblem,
    levels: usize,
    initial_params: &[f64],
    config: &AlignConfig,
    mut observer: Option<IterObserver<'_>>,
) -> Result<AlignmentResult> {
    if levels < 1 {
        return Err(Error::Config(
            "pyramid needs at least one level".to_string(),
        ));
    }

    // pyramid[0] is the finest (input) level.
    let mut pyramid = vec![problem.clone()];
    for level in 1..levels {
        let prev = &pyramid[level - 1];
        let next = AlignmentProblem::new(
            downsample_image(&prev.ref_image)?,
            downsample_image(&prev.live_image)?,
            match &prev.depth {
                Some(d) => Some(downsample_depth(d)?),
                None => None,
            },
            prev.intrinsics.halved(),
            prev.loss,
            prev.mode,
        )?;
        pyramid.push(next);
    }

    let mut params = initial_params.to_vec();
    let mut trace: Vec<TraceEntry> = Vec::new();
    let mut result = None;
    for (level_idx, level_problem) in pyramid.iter().rev().enumerate() {
        let offset = trace.last().map(|e| e.iter).unwrap_or(0);
        let mut level_observer = |entry: &TraceEntry, p: &[f64]| {
            if let Some(obs) = observer.as_mut() {
                let shifted = TraceEntry {
                    iter: entry.iter + offset,
                    ..*entry
                };
                obs(&shifted, p);
            }
        };
        let level_result =
            align_observed(level_problem, &params, config, Some(&mut level_observer))?;
        params = level_result.params.clone();
        for entry in &level_result.cost_trace {
            // Finer levels re-evaluate the carried-over params as their
            // iteration 0; keep only the coarsest level's initial entry so
            // iteration numbers stay unique.
            if level_idx > 0 && entry.iter == 0 {
                continue;
            }
            trace.push(TraceEntry {
                iter: entry.iter + offset,
                ..*entry
            });
        }
        result = Some(level_result);
    }

    let finest = result.expect("at least one level");
    Ok(AlignmentResult {
        params,
        cost_trace: trace,
        converged: finest.converged,
        final_mask_fraction: finest.final_mask_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::robust::LossKind;

    fn smooth_image(h: usize, w: usize) -> ScalarGrid {
        ScalarGrid::from_fn(h, w, |r, c| {
            let x = c as f64;
            let y = r as f64;
            0.5 + 0.25 * (x * 0.37).sin() * (y * 0.29).cos() + 0.15 * ((x + y) * 0.11).sin()
        })
        .unwrap()
    }

    fn so3_problem(h: usize, w: usize) -> AlignmentProblem {
        let img = smooth_image(h, w);
        let k = CameraIntrinsics::new(
            w as f64 * 0.9,
            w as f64 * 0.9,
            (w as f64 - 1.0) / 2.0,
            (h as f64 - 1.0) / 2.0,
        )
        .unwrap();
        AlignmentProblem::new(
            img.clone(),
            img,
            None,
            k,
            RobustLoss::new(LossKind::L2),
            AlignMode::So3,
        )
        .unwrap()
    }

    #[test]
    fn se3_mode_requires_depth() {
        let img = smooth_image(8, 8);
        let k = CameraIntrinsics::new(8.0, 8.0, 3.5, 3.5).unwrap();
        let err = AlignmentProblem::new(
            img.clone(),
            img,
            None,
            k,
            RobustLoss::new(LossKind::L2),
            AlignMode::Se3,
        );
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn identical_images_give_zero_cost_at_identity() {
        let problem = so3_problem(16, 16);
        let (cost, _, mask) = photometric_cost(&problem, &[0.0; 3]).unwrap();
        assert!(cost < 1e-20, "cost {cost}");
        // Interior pixels are all valid.
        assert!(mask.get(8, 8) == 1.0);
    }

    #[test]
    fn constant_offset_cost_matches_formula() {
        let img = smooth_image(16, 16);
        let mut live = img.clone();
        for v in live.data_mut() {
            *v += 0.1;
        }
        let k = CameraIntrinsics::new(14.0, 14.0, 7.5, 7.5).unwrap();
        let problem = AlignmentProblem::new(
            img,
            live,
            None,
            k,
            RobustLoss::new(LossKind::L2),
            AlignMode::So3,
        )
        .unwrap();
        let (cost, _, mask) = photometric_cost(&problem, &[0.0; 3]).unwrap();
        let n = mask.sum();
        assert!(n > 0.0);
        assert!((cost - n * 0.005).abs() < 1e-9, "cost {cost} n {n}");
    }

    #[test]
    fn gradient_is_stationary_at_perfect_alignment() {
        let problem = so3_problem(16, 16);
        let grad = photometric_gradient(&problem, &[0.0; 3]).unwrap();
        assert!(grad.iter().all(|g| g.abs() < 1e-10), "{grad:?}");
    }

    #[test]
    fn zero_overlap_means_zero_gradient() {
        let img = smooth_image(8, 8);
        let k = CameraIntrinsics::new(8.0, 8.0, 3.5, 3.5).unwrap();
        let problem = AlignmentProblem::new(
            img.clone(),
            img,
            None,
            k,
            RobustLoss::new(LossKind::L2),
            AlignMode::So3,
        )
        .unwrap();
        // Quarter turn about y throws every ray far out of the image.
        let params = [0.0, std::f64::consts::FRAC_PI_2, 0.0];
        let (cost, _, mask) = photometric_cost(&problem, &params).unwrap();
        assert_eq!(cost, 0.0);
        assert_eq!(mask.sum(), 0.0);
        let grad = photometric_gradient(&problem, &params).unwrap();
        assert!(grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn align_on_identical_images_converges_immediately() {
        let problem = so3_problem(16, 16);
        let result = align(&problem, &[0.0; 3], &AlignConfig::default()).unwrap();
        assert!(result.converged);
        assert!(result.cost_trace.len() <= 2);
        assert!(result.params.iter().all(|p| p.abs() < 1e-9));
    }

    #[test]
    fn accepted_iterations_never_increase_cost() {
        let img = smooth_image(24, 24);
        let k = CameraIntrinsics::new(20.0, 20.0, 11.5, 11.5).unwrap();
        let problem = AlignmentProblem::new(
            img.clone(),
            img,
            None,
            k,
            RobustLoss::new(LossKind::L2),
            AlignMode::So3,
        )
        .unwrap();
        let result = align(&problem, &[0.02, -0.015, 0.03], &AlignConfig::default()).unwrap();
        for pair in result.cost_trace.windows(2) {
            assert!(pair[1].cost <= pair[0].cost);
        }
    }

    #[test]
    fn single_level_pyramid_matches_align() {
        let problem = so3_problem(20, 20);
        let init = [0.01, 0.0, -0.02];
        let config = AlignConfig::default();
        let direct = align(&problem, &init, &config).unwrap();
        let pyramid = coarse_to_fine_align(&problem, 1, &init, &config).unwrap();
        assert_eq!(direct.params, pyramid.params);
        assert_eq!(direct.cost_trace.len(), pyramid.cost_trace.len());
    }

    #[test]
    fn param_length_is_validated() {
        let problem = so3_problem(8, 8);
        assert!(photometric_cost(&problem, &[0.0; 6]).is_err());
        assert!(align(&problem, &[0.0; 2], &AlignConfig::default()).is_err());
    }
}
