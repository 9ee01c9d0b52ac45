//! Shared helpers for the integration suites: an independent central
//! finite-difference oracle, relative-error metrics and image fixtures.

#![allow(dead_code)]

use geowarp_core::{CameraIntrinsics, ScalarGrid};
use rand::rngs::StdRng;
use rand::Rng;

/// Central finite difference of `f` in every coordinate of `x`.
///
/// Written here, independent of the library's own gradcheck module, so the
/// analytic backward passes are checked against a second implementation.
pub fn central_diff(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + step;
        let plus = f(&probe);
        probe[i] = x[i] - step;
        let minus = f(&probe);
        probe[i] = x[i];
        grad[i] = (plus - minus) / (2.0 * step);
    }
    grad
}

/// `‖a − b‖∞ / max(‖a‖∞, ‖b‖∞, 1e-10)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    inf(&diff) / inf(a).max(inf(b)).max(1e-10)
}

/// Smooth multi-scale test image in [0, 1]: low-frequency structure for
/// wide convergence basins with milder detail on top.
pub fn smooth_image(h: usize, w: usize, phase: f64) -> ScalarGrid {
    ScalarGrid::from_fn(h, w, |r, c| {
        let x = c as f64;
        let y = r as f64;
        0.5 + 0.20
            * (x * std::f64::consts::TAU / 64.0 + phase).sin()
            * (y * std::f64::consts::TAU / 64.0 - 0.3 * phase).cos()
            + 0.14 * (x * 0.26 + 1.0 + phase).sin() * (y * 0.21 + 0.5).cos()
            + 0.08 * ((x + 2.0 * y) * 0.09 + 0.4 * phase).sin()
    })
    .unwrap()
}

/// Smooth strictly positive depth map around 2 scene units.
pub fn smooth_depth(h: usize, w: usize) -> ScalarGrid {
    ScalarGrid::from_fn(h, w, |r, c| {
        2.0 + 0.4 * ((r as f64) * 0.17).sin() * ((c as f64) * 0.13).cos()
    })
    .unwrap()
}

/// Intrinsics centered on an HxW image with focal length ~0.9·W.
pub fn centered_intrinsics(h: usize, w: usize) -> CameraIntrinsics {
    CameraIntrinsics::new(
        w as f64 * 0.9,
        w as f64 * 0.9,
        (w as f64 - 1.0) / 2.0,
        (h as f64 - 1.0) / 2.0,
    )
    .unwrap()
}

pub fn random_range(rng: &mut StdRng, lo: f64, hi: f64) -> f64 {
    rng.random_range(lo..hi)
}
