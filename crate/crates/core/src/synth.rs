//! Synthetic alignment-pair generation by warping a base image through the
//! full module chain at a known pose.
//!
//! The generated pair is exactly self-consistent with the alignment cost:
//! the *reference* image is the chain warp of the base at the given pose and
//! the base itself serves as the live image, so evaluating the photometric
//! cost at the ground-truth pose reproduces the reference bit-for-bit at
//! every valid pixel. Optional Gaussian pixel noise (seeded, deterministic)
//! is added to the live image.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::align::{AlignMode, AlignmentProblem};
use crate::camera::CameraIntrinsics;
use crate::error::{Error, Result};
use crate::grid::ScalarGrid;
use crate::lie::TransformMatrix;
use crate::robust::RobustLoss;

/// Noise and seeding knobs for [`synth_pair`].
#[derive(Debug, Clone, Copy)]
pub struct SynthOptions {
    /// Standard deviation of Gaussian pixel noise added to the live image.
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

/// A generated pair: reference (warped), live (base, possibly noisy),
/// the shared depth map, the warp validity mask and the ground-truth pose.
#[derive(Debug, Clone)]
pub struct SynthPair {
    pub ref_image: ScalarGrid,
    pub live_image: ScalarGrid,
    pub depth: ScalarGrid,
    pub mask: ScalarGrid,
    pub ground_truth_pose: [f64; 6],
}

/// Warps `image` through grid generation, projection and bilinear sampling
/// at transform `t`, using `depth` as the output-frame depth map.
pub fn warp_image(
    image: &ScalarGrid,
    depth: &ScalarGrid,
    k: &CameraIntrinsics,
    transform: &TransformMatrix,
) -> Result<(ScalarGrid, ScalarGrid)> {
    use crate::camera::{grid_generator_3d, project_with_epsilon, W_EPSILON};
    use crate::grid::VectorGrid;
    use crate::sampler::bilinear_sample;

    if !image.same_shape(depth) {
        return Err(Error::shape(
            "warp_image",
            format!("{}x{}", image.height(), image.width()),
            format!("{}x{}", depth.height(), depth.width()),
        ));
    }
    let cloud = grid_generator_3d(depth, k, transform)?;
    let mut coords = VectorGrid::zeros(image.height(), image.width(), 2)?;
    let mut chain_valid = ScalarGrid::zeros(image.height(), image.width())?;
    for r in 0..image.height() {
        for c in 0..image.width() {
            if !cloud.is_valid(r, c) {
                coords.set(r, c, 0, -1.0);
                coords.set(r, c, 1, -1.0);
                continue;
            }
            match project_with_epsilon(&cloud.point(r, c), k, W_EPSILON) {
                Ok(pix) => {
                    coords.set(r, c, 0, pix.x);
                    coords.set(r, c, 1, pix.y);
                    chain_valid.set(r, c, 1.0);
                }
                Err(_) => {
                    coords.set(r, c, 0, -1.0);
                    coords.set(r, c, 1, -1.0);
                }
            }
        }
    }
    let (warped, sample_mask) = bilinear_sample(image, &coords)?;
    let mut mask = ScalarGrid::zeros(image.height(), image.width())?;
    for r in 0..image.height() {
        for c in 0..image.width() {
            mask.set(r, c, chain_valid.get(r, c) * sample_mask.get(r, c));
        }
    }
    Ok((warped, mask))
}

/// Generates a self-consistent alignment pair from a base image, its depth
/// and a ground-truth pose.
///
/// Refuses poses leaving less than 10% of the pixels valid. With the same
/// seed the output is reproducible element-for-element.
pub fn synth_pair(
    base_image: &ScalarGrid,
    base_depth: &ScalarGrid,
    pose: &[f64; 6],
    k: &CameraIntrinsics,
    options: &SynthOptions,
) -> Result<SynthPair> {
    if pose.iter().any(|v| !v.is_finite()) {
        return Err(Error::ParamDomain(
            "pose components must be finite".to_string(),
        ));
    }
    let transform = crate::lie::se3_forward(&crate::lie::Se3Params::from_slice(pose)?);
    let (ref_image, mask) = warp_image(base_image, base_depth, k, &transform)?;

    let valid_fraction = mask.sum() / mask.len() as f64;
    if valid_fraction < 0.10 {
        return Err(Error::InsufficientOverlap(format!(
            "pose leaves only {:.1}% of pixels valid (need at least 10%)",
            valid_fraction * 100.0
        )));
    }

    let mut live_image = base_image.clone();
    if options.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
        let normal = Normal::new(0.0, options.noise_sigma)
            .map_err(|e| Error::Config(format!("invalid noise sigma: {e}")))?;
        for v in live_image.data_mut() {
            *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }

    Ok(SynthPair {
        ref_image,
        live_image,
        depth: base_depth.clone(),
        mask,
        ground_truth_pose: *pose,
    })
}

impl SynthPair {
    /// Turns the pair into an alignment problem under the intrinsics that
    /// generated it.
    pub fn to_problem(
        &self,
        k: &CameraIntrinsics,
        mode: AlignMode,
        loss: RobustLoss,
    ) -> Result<AlignmentProblem> {
        AlignmentProblem::new(
            self.ref_image.clone(),
            self.live_image.clone(),
            match mode {
                AlignMode::Se3 => Some(self.depth.clone()),
                AlignMode::So3 => None,
            },
            *k,
            loss,
            mode,
        )
    }
}
