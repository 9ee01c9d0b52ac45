//! Shared fixtures for the criterion benchmarks.

use geowarp_core::synth::{synth_pair, SynthOptions};
use geowarp_core::{
    AlignMode, AlignmentProblem, CameraIntrinsics, LossKind, RobustLoss, ScalarGrid, VectorGrid,
};

/// Smooth benchmark image in [0, 1].
pub fn bench_image(h: usize, w: usize) -> ScalarGrid {
    ScalarGrid::from_fn(h, w, |r, c| {
        let x = c as f64;
        let y = r as f64;
        0.5 + 0.2 * (x * 0.21).sin() * (y * 0.17).cos() + 0.15 * ((x + 2.0 * y) * 0.07).sin()
    })
    .unwrap()
}

/// Identity-lattice sampling grid jittered off the integer lines.
pub fn jittered_grid(h: usize, w: usize) -> VectorGrid {
    let mut grid = VectorGrid::zeros(h, w, 2).unwrap();
    for r in 0..h {
        for c in 0..w {
            grid.set(r, c, 0, c as f64 + 0.37);
            grid.set(r, c, 1, r as f64 + 0.21);
        }
    }
    grid
}

/// A ready-to-solve SE3 alignment problem of the given size.
pub fn bench_problem(size: usize) -> AlignmentProblem {
    let image = bench_image(size, size);
    let depth = ScalarGrid::filled(size, size, 2.0).unwrap();
    let k = CameraIntrinsics::new(
        size as f64 * 0.9,
        size as f64 * 0.9,
        (size as f64 - 1.0) / 2.0,
        (size as f64 - 1.0) / 2.0,
    )
    .unwrap();
    let pose = [0.004, -0.003, 0.006, 0.002, 0.001, -0.002];
    let pair = synth_pair(&image, &depth, &pose, &k, &SynthOptions::default()).unwrap();
    pair.to_problem(&k, AlignMode::Se3, RobustLoss::new(LossKind::Huber))
        .unwrap()
}
