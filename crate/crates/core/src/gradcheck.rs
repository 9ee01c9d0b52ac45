//! Finite-difference verification suites for every backward pass.
//!
//! Each check builds seeded random instances of a layer, computes the
//! analytic gradient through the layer's backward pass and compares it
//! against central finite differences of the scalar `φ(x) = <G, forward(x)>`
//! for a random upstream gradient G. The reported number is the worst
//! relative error over all trials, measured as
//! `‖g_fd − g_an‖∞ / max(‖g_fd‖∞, ‖g_an‖∞, 1e-10)`.
//!
//! These suites are runtime code (they back the `gradcheck` CLI subcommand);
//! the test suites assert the same properties independently.

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::align::{photometric_cost, photometric_gradient, AlignMode};
use crate::camera::{
    grid_generator_3d, grid_generator_3d_backward, project, project_backward, CameraIntrinsics,
    PointCloudGrid,
};
use crate::error::{Error, Result};
use crate::flow;
use crate::grid::{ScalarGrid, VectorGrid};
use crate::lie::{self, Se3Params, Sim3Params, TransformMatrix};
use crate::robust::{LossKind, RobustLoss};
use crate::sampler::{bilinear_sample, bilinear_sample_backward};
use crate::synth::{synth_pair, SynthOptions};

/// Internal seed; fixed so two consecutive CLI runs are byte-identical.
const SUITE_SEED: u64 = 0x67656f77_61727031;

/// Step sizes for the central differences.
const STEP_LAYER: f64 = 1e-5;
const STEP_ROBUST: f64 = 1e-6;
const STEP_PHOTOMETRIC: f64 = 1e-6;

/// Default relative tolerance for layer-level checks.
pub const DEFAULT_LAYER_TOL: f64 = 1e-6;
/// Relative tolerance for the end-to-end photometric chain.
pub const PHOTOMETRIC_TOL: f64 = 1e-4;

/// Result of one named check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub max_rel_err: f64,
    pub tol: f64,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tol
    }
}

/// Suite configuration: trials per check and the layer tolerance.
#[derive(Debug, Clone, Copy)]
pub struct SuiteConfig {
    pub trials: usize,
    pub tol: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            trials: 10,
            tol: DEFAULT_LAYER_TOL,
        }
    }
}

/// Central difference of `f` in every coordinate of `x`.
fn central_diff(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], step: f64) -> Vec<f64> {
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

fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    inf(&diff) / inf(analytic).max(inf(numeric)).max(1e-10)
}

fn random_matrix3(rng: &mut StdRng) -> Matrix3<f64> {
    Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0))
}

fn random_transform_grad(rng: &mut StdRng) -> TransformMatrix {
    TransformMatrix::from_fn(|_, _| rng.random_range(-1.0..1.0))
}

fn frobenius_dot3(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    a.component_mul(b).sum()
}

fn frobenius_dot34(a: &TransformMatrix, b: &TransformMatrix) -> f64 {
    a.component_mul(b).sum()
}

fn check_so3(rng: &mut StdRng, trials: usize) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let v = Vector3::from_fn(|_, _| rng.random_range(-1.5..1.5));
        let g = random_matrix3(rng);
        let rot = lie::so3_exp(&v);
        let analytic = lie::so3_backward(&v, &rot, &g);
        let mut f = |x: &[f64]| frobenius_dot3(&g, &lie::so3_exp(&Vector3::new(x[0], x[1], x[2])));
        let numeric = central_diff(&mut f, v.as_slice(), STEP_LAYER);
        worst = worst.max(rel_err(analytic.as_slice(), &numeric));
    }
    worst
}

fn check_quaternion(rng: &mut StdRng, trials: usize) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let q: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        if q.iter().map(|v| v * v).sum::<f64>().sqrt() < 0.1 {
            continue;
        }
        let g = random_matrix3(rng);
        let quat = lie::Quaternion::new(q[0], q[1], q[2], q[3]);
        let analytic = lie::quat_backward(&quat, &g).expect("norm checked");
        let mut f = |x: &[f64]| {
            let quat = lie::Quaternion::new(x[0], x[1], x[2], x[3]);
            frobenius_dot3(&g, &lie::quat_to_rotation(&quat).expect("norm checked"))
        };
        let numeric = central_diff(&mut f, &q, STEP_LAYER);
        worst = worst.max(rel_err(analytic.as_slice(), &numeric));
    }
    worst
}

fn check_euler(rng: &mut StdRng, trials: usize) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let e: Vec<f64> = (0..3).map(|_| rng.random_range(-1.2..1.2)).collect();
        let g = random_matrix3(rng);
        let angles = lie::EulerAngles::new(e[0], e[1], e[2]);
        let analytic = lie::euler_backward(&angles, &g);
        let mut f = |x: &[f64]| {
            frobenius_dot3(
                &g,
                &lie::euler_to_rotation(&lie::EulerAngles::new(x[0], x[1], x[2])),
            )
        };
        let numeric = central_diff(&mut f, &e, STEP_LAYER);
        worst = worst.max(rel_err(analytic.as_slice(), &numeric));
    }
    worst
}

fn check_se3(rng: &mut StdRng, trials: usize) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let p: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = random_transform_grad(rng);
        let params = Se3Params::from_slice(&p).expect("length 6");
        let analytic = lie::se3_backward(&params, &g);
        let mut f = |x: &[f64]| {
            let params = Se3Params::from_slice(x).expect("length 6");
            frobenius_dot34(&g, &lie::se3_forward(&params))
        };
        let numeric = central_diff(&mut f, &p, STEP_LAYER);
        worst = worst.max(rel_err(analytic.as_slice(), &numeric));
    }
    worst
}

fn check_sim3(rng: &mut StdRng, trials: usize) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let mut p: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        p.push(rng.random_range(0.5..2.0)); // scale
        let g = random_transform_grad(rng);
        let params = Sim3Params::new(
            Vector3::new(p[0], p[1], p[2]),
            Vector3::new(p[3], p[4], p[5]),
            p[6],
        );
        let analytic = lie::sim3_backward(&params, &g);
        let mut f = |x: &[f64]| {
            let params = Sim3Params::new(
                Vector3::new(x[0], x[1], x[2]),
                Vector3::new(x[3], x[4], x[5]),
                x[6],
            );
            frobenius_dot34(&g, &lie::sim3_forward(&params).expect("positive scale"))
        };
        let numeric = central_diff(&mut f, &p, STEP_LAYER);
        worst = worst.max(rel_err(analytic.as_slice(), &numeric));
    }
    worst
}

fn check_projection(rng: &mut StdRng, trials: usize) -> f64 {
    let k = CameraIntrinsics::new(525.0, 500.0, 319.5, 239.5).expect("valid");
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let p = [
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(0.5..5.0),
        ];
        let g = Vector2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let analytic =
            project_backward(&Vector3::new(p[0], p[1], p[2]), &k, &g).expect("w in range");
        let mut f = |x: &[f64]| {
            let pix = project(&Vector3::new(x[0], x[1], x[2]), &k).expect("w in range");
            g.x * pix.x + g.y * pix.y
        };
        let numeric = central_diff(&mut f, &p, STEP_LAYER);
        worst = worst.max(rel_err(analytic.as_slice(), &numeric));
    }
    worst
}

fn random_depth(rng: &mut StdRng, h: usize, w: usize) -> ScalarGrid {
    ScalarGrid::from_fn(h, w, |_, _| rng.random_range(0.5..3.0)).expect("valid dims")
}

fn check_grid_generator(rng: &mut StdRng, trials: usize) -> f64 {
    let k = CameraIntrinsics::new(8.0, 7.0, 3.5, 3.5).expect("valid");
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let depth = random_depth(rng, 4, 4);
        let pose: Vec<f64> = (0..6).map(|_| rng.random_range(-0.4..0.4)).collect();
        let transform = lie::se3_forward(&Se3Params::from_slice(&pose).expect("length 6"));
        let grad_points = VectorGrid::from_vec(
            4,
            4,
            3,
            (0..48).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .expect("valid dims");
        let (grad_t, grad_d) =
            grid_generator_3d_backward(&depth, &k, &transform, &grad_points).expect("shapes");

        // Transform entries.
        let t_flat: Vec<f64> = (0..12).map(|i| transform[(i / 4, i % 4)]).collect();
        let mut f_t = |x: &[f64]| {
            let mut tm = TransformMatrix::zeros();
            for i in 0..12 {
                tm[(i / 4, i % 4)] = x[i];
            }
            let cloud = grid_generator_3d(&depth, &k, &tm).expect("shapes");
            let mut acc = 0.0;
            for r in 0..4 {
                for c in 0..4 {
                    let p = cloud.point(r, c);
                    acc += grad_points.get(r, c, 0) * p.x
                        + grad_points.get(r, c, 1) * p.y
                        + grad_points.get(r, c, 2) * p.z;
                }
            }
            acc
        };
        let numeric_t = central_diff(&mut f_t, &t_flat, STEP_LAYER);
        let analytic_t: Vec<f64> = (0..12).map(|i| grad_t[(i / 4, i % 4)]).collect();
        worst = worst.max(rel_err(&analytic_t, &numeric_t));

        // Depth entries.
        let mut f_d = |x: &[f64]| {
            let d = ScalarGrid::from_vec(4, 4, x.to_vec()).expect("valid dims");
            let cloud = grid_generator_3d(&d, &k, &transform).expect("shapes");
            let mut acc = 0.0;
            for r in 0..4 {
                for c in 0..4 {
                    let p = cloud.point(r, c);
                    acc += grad_points.get(r, c, 0) * p.x
                        + grad_points.get(r, c, 1) * p.y
                        + grad_points.get(r, c, 2) * p.z;
                }
            }
            acc
        };
        let numeric_d = central_diff(&mut f_d, depth.data(), STEP_LAYER);
        worst = worst.max(rel_err(grad_d.data(), &numeric_d));
    }
    worst
}

/// Sampling coordinates kept away from integer lattice lines, where the
/// bilinear interpolant is not differentiable.
fn random_offgrid_coords(
    rng: &mut StdRng,
    h: usize,
    w: usize,
    src_h: usize,
    src_w: usize,
) -> VectorGrid {
    let mut grid = VectorGrid::zeros(h, w, 2).expect("valid dims");
    for r in 0..h {
        for c in 0..w {
            let x = rng.random_range(0.0..(src_w - 1) as f64);
            let y = rng.random_range(0.0..(src_h - 1) as f64);
            let clamp_frac = |v: f64| v.floor() + (v - v.floor()).clamp(1e-3, 1.0 - 1e-3);
            grid.set(r, c, 0, clamp_frac(x).min((src_w - 1) as f64 - 1e-3));
            grid.set(r, c, 1, clamp_frac(y).min((src_h - 1) as f64 - 1e-3));
        }
    }
    grid
}

fn check_sampler(rng: &mut StdRng, trials: usize) -> f64 {
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let src = ScalarGrid::from_fn(8, 8, |_, _| rng.random_range(0.0..1.0)).expect("dims");
        let grid = random_offgrid_coords(rng, 6, 6, 8, 8);
        let upstream = ScalarGrid::from_fn(6, 6, |_, _| rng.random_range(-1.0..1.0)).expect("dims");
        let (grad_src, grad_grid) =
            bilinear_sample_backward(&src, &grid, &upstream).expect("shapes");

        let mut f_coords = |x: &[f64]| {
            let g = VectorGrid::from_vec(6, 6, 2, x.to_vec()).expect("dims");
            let (warped, mask) = bilinear_sample(&src, &g).expect("shapes");
            let mut acc = 0.0;
            for r in 0..6 {
                for c in 0..6 {
                    acc += upstream.get(r, c) * warped.get(r, c) * mask.get(r, c);
                }
            }
            acc
        };
        let numeric_coords = central_diff(&mut f_coords, grid.data(), STEP_LAYER);
        worst = worst.max(rel_err(grad_grid.data(), &numeric_coords));

        let mut f_src = |x: &[f64]| {
            let s = ScalarGrid::from_vec(8, 8, x.to_vec()).expect("dims");
            let (warped, _) = bilinear_sample(&s, &grid).expect("shapes");
            let mut acc = 0.0;
            for r in 0..6 {
                for c in 0..6 {
                    acc += upstream.get(r, c) * warped.get(r, c);
                }
            }
            acc
        };
        let numeric_src = central_diff(&mut f_src, src.data(), STEP_LAYER);
        worst = worst.max(rel_err(grad_src.data(), &numeric_src));
    }
    worst
}

fn random_points(rng: &mut StdRng, h: usize, w: usize) -> PointCloudGrid {
    let points = VectorGrid::from_vec(
        h,
        w,
        3,
        (0..h * w * 3)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    )
    .expect("dims");
    let valid = ScalarGrid::filled(h, w, 1.0).expect("dims");
    PointCloudGrid::new(points, valid).expect("shapes")
}

/// Shared driver for the 2D field layers: builds a random field, runs the
/// layer forward/backward and compares against finite differences of
/// `Σ upstream · coords`.
fn check_field_layer(
    rng: &mut StdRng,
    trials: usize,
    channels: usize,
    forward: &dyn Fn(&VectorGrid) -> Result<VectorGrid>,
    backward: &dyn Fn(&VectorGrid, &VectorGrid) -> Result<VectorGrid>,
) -> f64 {
    let (h, w) = (8, 8);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let field = VectorGrid::from_vec(
            h,
            w,
            channels,
            (0..h * w * channels)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .expect("dims");
        let upstream = VectorGrid::from_vec(
            h,
            w,
            2,
            (0..h * w * 2)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .expect("dims");
        let analytic = backward(&field, &upstream).expect("shapes");
        let mut f = |x: &[f64]| {
            let fgrid = VectorGrid::from_vec(h, w, channels, x.to_vec()).expect("dims");
            let coords = forward(&fgrid).expect("shapes");
            let mut acc = 0.0;
            for r in 0..h {
                for c in 0..w {
                    acc += upstream.get(r, c, 0) * coords.get(r, c, 0)
                        + upstream.get(r, c, 1) * coords.get(r, c, 1);
                }
            }
            acc
        };
        let numeric = central_diff(&mut f, field.data(), STEP_LAYER);
        worst = worst.max(rel_err(analytic.data(), &numeric));
    }
    worst
}

fn check_flow_layers(rng: &mut StdRng, trials: usize) -> Vec<CheckOutcome> {
    let mut out = Vec::new();
    let tol = DEFAULT_LAYER_TOL;

    out.push(CheckOutcome {
        name: "flow translation backward".to_string(),
        max_rel_err: check_field_layer(rng, trials, 2, &flow::flow_translation, &|_, up| {
            flow::flow_translation_backward(up)
        }),
        tol,
    });
    out.push(CheckOutcome {
        name: "flow affine backward".to_string(),
        max_rel_err: check_field_layer(rng, trials, 6, &flow::flow_affine, &|_, up| {
            flow::flow_affine_backward(up)
        }),
        tol,
    });
    out.push(CheckOutcome {
        name: "flow se2 backward".to_string(),
        max_rel_err: check_field_layer(rng, trials, 3, &flow::flow_se2, &flow::flow_se2_backward),
        tol,
    });

    // Plane disparity has a scalar output.
    let mut worst = 0.0f64;
    let (h, w) = (8, 8);
    for _ in 0..trials {
        let field = VectorGrid::from_vec(
            h,
            w,
            3,
            (0..h * w * 3)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect(),
        )
        .expect("dims");
        let upstream = ScalarGrid::from_fn(h, w, |_, _| rng.random_range(-1.0..1.0)).expect("dims");
        let analytic = flow::plane_disparity_backward(&upstream).expect("shapes");
        let mut f = |x: &[f64]| {
            let fgrid = VectorGrid::from_vec(h, w, 3, x.to_vec()).expect("dims");
            let d = flow::plane_disparity(&fgrid).expect("shapes");
            let mut acc = 0.0;
            for r in 0..h {
                for c in 0..w {
                    acc += upstream.get(r, c) * d.get(r, c);
                }
            }
            acc
        };
        let numeric = central_diff(&mut f, field.data(), STEP_LAYER);
        worst = worst.max(rel_err(analytic.data(), &numeric));
    }
    out.push(CheckOutcome {
        name: "plane disparity backward".to_string(),
        max_rel_err: worst,
        tol,
    });

    // Per-pixel Sim3 and 10-DoF over 3D point clouds, including the points.
    for (name, channels) in [
        ("pixel sim3 backward", 7usize),
        ("pixel 10dof backward", 10),
    ] {
        let (h, w) = (4, 4);
        let mut worst = 0.0f64;
        for _ in 0..trials {
            let mut data: Vec<f64> = Vec::with_capacity(h * w * channels);
            for _ in 0..h * w {
                for ch in 0..channels {
                    if ch == channels - 1 {
                        data.push(rng.random_range(0.5..2.0)); // scale
                    } else {
                        data.push(rng.random_range(-0.8..0.8));
                    }
                }
            }
            let field = VectorGrid::from_vec(h, w, channels, data).expect("dims");
            let points = random_points(rng, h, w);
            let upstream = VectorGrid::from_vec(
                h,
                w,
                3,
                (0..h * w * 3)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            )
            .expect("dims");

            let (analytic_field, analytic_points) = if channels == 7 {
                flow::pixel_sim3_backward(&field, &points, &upstream).expect("shapes")
            } else {
                flow::pixel_10dof_backward(&field, &points, &upstream).expect("shapes")
            };

            let eval = |fgrid: &VectorGrid, pts: &PointCloudGrid| {
                let cloud = if channels == 7 {
                    flow::pixel_sim3(fgrid, pts).expect("shapes")
                } else {
                    flow::pixel_10dof(fgrid, pts).expect("shapes")
                };
                let mut acc = 0.0;
                for r in 0..h {
                    for c in 0..w {
                        let p = cloud.point(r, c);
                        acc += upstream.get(r, c, 0) * p.x
                            + upstream.get(r, c, 1) * p.y
                            + upstream.get(r, c, 2) * p.z;
                    }
                }
                acc
            };

            let mut f_field = |x: &[f64]| {
                let fgrid = VectorGrid::from_vec(h, w, channels, x.to_vec()).expect("dims");
                eval(&fgrid, &points)
            };
            let numeric_field = central_diff(&mut f_field, field.data(), STEP_LAYER);
            worst = worst.max(rel_err(analytic_field.data(), &numeric_field));

            let mut f_points = |x: &[f64]| {
                let pgrid = VectorGrid::from_vec(h, w, 3, x.to_vec()).expect("dims");
                let pts = PointCloudGrid::new(pgrid, ScalarGrid::filled(h, w, 1.0).expect("dims"))
                    .expect("shapes");
                eval(&field, &pts)
            };
            let numeric_points = central_diff(&mut f_points, points.points().data(), STEP_LAYER);
            worst = worst.max(rel_err(analytic_points.data(), &numeric_points));
        }
        out.push(CheckOutcome {
            name: name.to_string(),
            max_rel_err: worst,
            tol,
        });
    }

    out
}

fn check_robust(rng: &mut StdRng, trials: usize) -> f64 {
    let mut worst = 0.0f64;
    for kind in LossKind::ALL {
        let loss = RobustLoss::new(kind);
        let scale = loss.scale();
        for _ in 0..trials.max(100) {
            let x = rng.random_range(-5.0 * scale..5.0 * scale);
            // Keep clear of the Huber/Tukey branch points.
            if (x.abs() - scale).abs() < 1e-3 {
                continue;
            }
            let analytic = loss.psi(x);
            let numeric =
                (loss.rho(x + STEP_ROBUST) - loss.rho(x - STEP_ROBUST)) / (2.0 * STEP_ROBUST);
            worst = worst.max(rel_err(&[analytic], &[numeric]));
        }
    }
    worst
}

fn smooth_test_image(h: usize, w: usize, phase: f64) -> ScalarGrid {
    ScalarGrid::from_fn(h, w, |r, c| {
        let x = c as f64;
        let y = r as f64;
        0.5 + 0.2 * (x * 0.23 + phase).sin() * (y * 0.19).cos()
            + 0.15 * ((x + 2.0 * y) * 0.08 + 0.4 * phase).sin()
    })
    .expect("dims")
}

/// Smallest distance of any transformed sample coordinate to the integer
/// lattice. The photometric cost has bilinear kinks exactly on the lattice;
/// finite differences are valid only when every sample is clear of them by
/// more than the coordinates can move during the FD probes.
fn min_lattice_distance(
    depth: &ScalarGrid,
    k: &CameraIntrinsics,
    transform: &TransformMatrix,
) -> f64 {
    let cloud = match grid_generator_3d(depth, k, transform) {
        Ok(c) => c,
        Err(_) => return 0.0,
    };
    let mut min_dist = f64::INFINITY;
    for r in 0..depth.height() {
        for c in 0..depth.width() {
            if !cloud.is_valid(r, c) {
                continue;
            }
            if let Ok(pix) = project(&cloud.point(r, c), k) {
                for v in [pix.x, pix.y] {
                    min_dist = min_dist.min((v - v.round()).abs());
                }
            }
        }
    }
    min_dist
}

/// Margin matching the FD step: pose probes of 1e-6 move samples by at most
/// a few times 1e-5 pixels for these intrinsics.
const LATTICE_MARGIN: f64 = 2e-4;

fn check_photometric(rng: &mut StdRng, trials: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    let (h, w) = (32, 32);
    let k = CameraIntrinsics::new(26.0, 24.0, 15.5, 15.5)?;
    for trial in 0..trials {
        let mode = if trial % 2 == 0 {
            AlignMode::So3
        } else {
            AlignMode::Se3
        };
        let kind = LossKind::ALL[trial % LossKind::ALL.len()];
        let loss = RobustLoss::with_scale(kind, 0.5)?;
        let base = smooth_test_image(h, w, rng.random_range(0.0..6.0));
        let depth = ScalarGrid::from_fn(h, w, |r, c| {
            2.0 + 0.3 * ((r as f64) * 0.21).sin() * ((c as f64) * 0.17).cos()
        })?;
        let gt = [
            rng.random_range(-0.02..0.02),
            rng.random_range(-0.02..0.02),
            rng.random_range(-0.02..0.02),
            rng.random_range(-0.01..0.01),
            rng.random_range(-0.01..0.01),
            rng.random_range(-0.01..0.01),
        ];
        let pair = synth_pair(&base, &depth, &gt, &k, &SynthOptions::default())?;
        let problem = pair.to_problem(&k, mode, loss)?;

        // Evaluate slightly off the ground truth so residuals are non-zero,
        // re-drawing the offset until every sample coordinate is clear of
        // the lattice kinks.
        let n = mode.param_len();
        let effective_depth = match mode {
            AlignMode::Se3 => depth.clone(),
            AlignMode::So3 => ScalarGrid::filled(h, w, 1.0)?,
        };
        let mut params = Vec::new();
        for attempt in 0..200 {
            params = (0..n)
                .map(|i| gt[i] + rng.random_range(-0.004..0.004))
                .collect();
            let transform = problem.transform(&params)?;
            if min_lattice_distance(&effective_depth, &k, &transform) > LATTICE_MARGIN {
                break;
            }
            if attempt == 199 {
                return Err(Error::Config(
                    "could not find a lattice-clear evaluation point".to_string(),
                ));
            }
        }

        let analytic = photometric_gradient(&problem, &params)?;
        let mut f = |x: &[f64]| {
            photometric_cost(&problem, x)
                .map(|(cost, _, _)| cost)
                .expect("params length fixed")
        };
        let numeric = central_diff(&mut f, &params, STEP_PHOTOMETRIC);
        worst = worst.max(rel_err(&analytic, &numeric));
    }
    Ok(worst)
}

/// Which suites a module name selects.
pub fn module_names() -> &'static [&'static str] {
    &[
        "all", "so3", "se3", "sim3", "proj", "sampler", "flow", "robust",
    ]
}

/// Runs the selected suites and returns one outcome per check.
pub fn run_suites(module: &str, config: &SuiteConfig) -> Result<Vec<CheckOutcome>> {
    let mut rng = StdRng::seed_from_u64(SUITE_SEED);
    let trials = config.trials.max(1);
    let tol = config.tol;
    let mut out = Vec::new();
    let all = module == "all";

    if all || module == "so3" {
        out.push(CheckOutcome {
            name: "so3 exp backward".to_string(),
            max_rel_err: check_so3(&mut rng, trials),
            tol,
        });
        out.push(CheckOutcome {
            name: "quaternion backward".to_string(),
            max_rel_err: check_quaternion(&mut rng, trials),
            tol,
        });
        out.push(CheckOutcome {
            name: "euler backward".to_string(),
            max_rel_err: check_euler(&mut rng, trials),
            tol,
        });
    }
    if all || module == "se3" {
        out.push(CheckOutcome {
            name: "se3 backward".to_string(),
            max_rel_err: check_se3(&mut rng, trials),
            tol,
        });
    }
    if all || module == "sim3" {
        out.push(CheckOutcome {
            name: "sim3 backward".to_string(),
            max_rel_err: check_sim3(&mut rng, trials),
            tol,
        });
    }
    if all || module == "proj" {
        out.push(CheckOutcome {
            name: "projection backward".to_string(),
            max_rel_err: check_projection(&mut rng, trials),
            tol,
        });
        out.push(CheckOutcome {
            name: "3d grid generator backward".to_string(),
            max_rel_err: check_grid_generator(&mut rng, trials),
            tol,
        });
    }
    if all || module == "sampler" {
        out.push(CheckOutcome {
            name: "bilinear sampler backward".to_string(),
            max_rel_err: check_sampler(&mut rng, trials),
            tol,
        });
    }
    if all || module == "flow" {
        for mut outcome in check_flow_layers(&mut rng, trials) {
            outcome.tol = tol;
            out.push(outcome);
        }
    }
    if all || module == "robust" {
        out.push(CheckOutcome {
            name: "m-estimator psi vs rho".to_string(),
            max_rel_err: check_robust(&mut rng, trials),
            // The robust check compares scalars; criterion is 1e-5.
            tol: tol.max(1e-5),
        });
    }
    if all {
        out.push(CheckOutcome {
            name: "photometric end-to-end".to_string(),
            max_rel_err: check_photometric(&mut rng, trials)?,
            tol: tol.max(PHOTOMETRIC_TOL),
        });
    }

    if out.is_empty() {
        return Err(Error::Config(format!(
            "unknown gradcheck module '{module}' (expected one of {})",
            module_names().join("|")
        )));
    }
    Ok(out)
}
