//! Property and oracle suites for the Lie-group layers.

mod common;

use common::{central_diff, rel_err};
use geowarp_core::lie::{
    euler_backward, euler_to_rotation, quat_backward, quat_to_rotation, se3_backward, se3_forward,
    sim3_backward, sim3_forward, skew, so3_backward, so3_exp, EulerAngles, Quaternion, Se3Params,
    Sim3Params, TransformMatrix,
};
use geowarp_core::SMALL_ANGLE_THRESHOLD;
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Brute-force matrix exponential of [v]× by scaling and squaring with a
/// long Taylor series, independent of the Rodrigues closed form.
fn matrix_exp_oracle(v: &Vector3<f64>) -> Matrix3<f64> {
    let mut a = skew(v);
    // Scale down until the norm is tiny, exponentiate by series, square back.
    let mut squarings = 0;
    while a.norm() > 0.25 {
        a /= 2.0;
        squarings += 1;
    }
    let mut result = Matrix3::identity();
    let mut term = Matrix3::identity();
    for k in 1..=20 {
        term = term * a / k as f64;
        result += term;
    }
    for _ in 0..squarings {
        result = result * result;
    }
    result
}

#[test]
fn exp_matches_matrix_exponential_oracle() {
    let cases = [
        Vector3::new(0.3, -0.2, 0.1),
        Vector3::new(1.2, 0.5, -0.8),
        Vector3::new(-2.0, 1.0, 0.4),
        Vector3::new(0.0, 0.0, 3.0),
    ];
    for v in cases {
        let rodrigues = so3_exp(&v);
        let oracle = matrix_exp_oracle(&v);
        assert!(
            (rodrigues - oracle).amax() < 1e-12,
            "v = {v:?}: {rodrigues} vs {oracle}"
        );
        assert!((rodrigues.transpose() * rodrigues - Matrix3::identity()).norm() < 1e-10);
        assert!((rodrigues.determinant() - 1.0).abs() < 1e-10);
    }
}

#[test]
fn backward_matches_finite_differences() {
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..25 {
        let v = Vector3::from_fn(|_, _| rng.random_range(-1.5..1.5));
        let g = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let rot = so3_exp(&v);
        let analytic = so3_backward(&v, &rot, &g);
        let mut f = |x: &[f64]| {
            g.component_mul(&so3_exp(&Vector3::new(x[0], x[1], x[2])))
                .sum()
        };
        let numeric = central_diff(&mut f, v.as_slice(), 1e-5);
        let err = rel_err(analytic.as_slice(), &numeric);
        assert!(err < 1e-6, "v = {v:?}: rel err {err}");
    }
}

#[test]
fn backward_all_ones_gradient_case() {
    let v = Vector3::new(0.3, -0.2, 0.1);
    let g = Matrix3::from_element(1.0);
    let rot = so3_exp(&v);
    let analytic = so3_backward(&v, &rot, &g);
    let mut f = |x: &[f64]| {
        g.component_mul(&so3_exp(&Vector3::new(x[0], x[1], x[2])))
            .sum()
    };
    let numeric = central_diff(&mut f, v.as_slice(), 1e-5);
    assert!(rel_err(analytic.as_slice(), &numeric) < 1e-6);
}

#[test]
fn backward_over_the_spec_angle_range() {
    // ‖v‖ from 1e-6 up to just below π.
    let mut rng = StdRng::seed_from_u64(12);
    for i in 0..30 {
        let magnitude = match i % 3 {
            0 => rng.random_range(1e-6..1e-3),
            1 => rng.random_range(1e-3..1.0),
            _ => rng.random_range(1.0..std::f64::consts::PI - 0.1),
        };
        let axis = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0)).normalize();
        let v = axis * magnitude;
        let g = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let rot = so3_exp(&v);
        let analytic = so3_backward(&v, &rot, &g);
        let mut f = |x: &[f64]| {
            g.component_mul(&so3_exp(&Vector3::new(x[0], x[1], x[2])))
                .sum()
        };
        let numeric = central_diff(&mut f, v.as_slice(), 1e-5);
        let err = rel_err(analytic.as_slice(), &numeric);
        assert!(err < 1e-6, "‖v‖ = {magnitude}: rel err {err}");
    }
}

#[test]
fn taylor_branch_is_continuous_at_the_threshold() {
    // Straddle the threshold tightly enough that the angle difference
    // itself is negligible; any residual gap is the branch switch.
    for axis in [Vector3::x(), Vector3::y(), Vector3::z()] {
        let below = so3_exp(&(axis * (SMALL_ANGLE_THRESHOLD * (1.0 - 1e-9))));
        let above = so3_exp(&(axis * (SMALL_ANGLE_THRESHOLD * (1.0 + 1e-9))));
        assert!((below - above).amax() < 1e-12);
    }
}

#[test]
fn se3_backward_matches_finite_differences() {
    let mut rng = StdRng::seed_from_u64(13);
    for _ in 0..15 {
        let p: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = TransformMatrix::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let analytic = se3_backward(&Se3Params::from_slice(&p).unwrap(), &g);
        let mut f = |x: &[f64]| {
            g.component_mul(&se3_forward(&Se3Params::from_slice(x).unwrap()))
                .sum()
        };
        let numeric = central_diff(&mut f, &p, 1e-5);
        assert!(rel_err(analytic.as_slice(), &numeric) < 1e-6);
    }
}

#[test]
fn sim3_backward_matches_finite_differences() {
    let mut rng = StdRng::seed_from_u64(14);
    for _ in 0..15 {
        let mut p: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        p.push(rng.random_range(0.4..2.5));
        let g = TransformMatrix::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let params = Sim3Params::new(
            Vector3::new(p[0], p[1], p[2]),
            Vector3::new(p[3], p[4], p[5]),
            p[6],
        );
        let analytic = sim3_backward(&params, &g);
        let mut f = |x: &[f64]| {
            let params = Sim3Params::new(
                Vector3::new(x[0], x[1], x[2]),
                Vector3::new(x[3], x[4], x[5]),
                x[6],
            );
            g.component_mul(&sim3_forward(&params).unwrap()).sum()
        };
        let numeric = central_diff(&mut f, &p, 1e-5);
        assert!(rel_err(analytic.as_slice(), &numeric) < 1e-6);
    }
}

#[test]
fn quaternion_backward_matches_finite_differences() {
    let mut rng = StdRng::seed_from_u64(15);
    for _ in 0..15 {
        let q: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        if q.iter().map(|v| v * v).sum::<f64>().sqrt() < 0.2 {
            continue;
        }
        let g = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let analytic = quat_backward(&Quaternion::new(q[0], q[1], q[2], q[3]), &g).unwrap();
        let mut f = |x: &[f64]| {
            let rot = quat_to_rotation(&Quaternion::new(x[0], x[1], x[2], x[3])).unwrap();
            g.component_mul(&rot).sum()
        };
        let numeric = central_diff(&mut f, &q, 1e-5);
        assert!(rel_err(analytic.as_slice(), &numeric) < 1e-6);
    }
}

#[test]
fn euler_backward_matches_finite_differences() {
    let mut rng = StdRng::seed_from_u64(16);
    for _ in 0..15 {
        let e: Vec<f64> = (0..3).map(|_| rng.random_range(-1.3..1.3)).collect();
        let g = Matrix3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let analytic = euler_backward(&EulerAngles::new(e[0], e[1], e[2]), &g);
        let mut f = |x: &[f64]| {
            g.component_mul(&euler_to_rotation(&EulerAngles::new(x[0], x[1], x[2])))
                .sum()
        };
        let numeric = central_diff(&mut f, &e, 1e-5);
        assert!(rel_err(analytic.as_slice(), &numeric) < 1e-6);
    }
}

#[test]
fn single_axis_parameterizations_agree() {
    let angle = 0.7343;
    let from_so3 = so3_exp(&Vector3::new(0.0, 0.0, angle));
    let from_euler = euler_to_rotation(&EulerAngles::new(0.0, 0.0, angle));
    let half = angle / 2.0;
    let from_quat = quat_to_rotation(&Quaternion::new(half.cos(), 0.0, 0.0, half.sin())).unwrap();
    assert!((from_so3 - from_euler).amax() < 1e-12);
    assert!((from_so3 - from_quat).amax() < 1e-12);

    // Same agreement about x.
    let from_so3 = so3_exp(&Vector3::new(angle, 0.0, 0.0));
    let from_euler = euler_to_rotation(&EulerAngles::new(angle, 0.0, 0.0));
    let from_quat = quat_to_rotation(&Quaternion::new(half.cos(), half.sin(), 0.0, 0.0)).unwrap();
    assert!((from_so3 - from_euler).amax() < 1e-12);
    assert!((from_so3 - from_quat).amax() < 1e-12);
}

#[test]
fn sim3_unit_scale_equals_se3_exactly() {
    let mut rng = StdRng::seed_from_u64(17);
    for _ in 0..10 {
        let v = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
        let t = Vector3::from_fn(|_, _| rng.random_range(-3.0..3.0));
        assert_eq!(
            se3_forward(&Se3Params::new(v, t)),
            sim3_forward(&Sim3Params::new(v, t, 1.0)).unwrap()
        );
    }
}

proptest! {
    #[test]
    fn exp_is_orthonormal_with_unit_determinant(
        x in -3.0f64..3.0,
        y in -3.0f64..3.0,
        z in -3.0f64..3.0,
    ) {
        let rot = so3_exp(&Vector3::new(x, y, z));
        prop_assert!((rot.transpose() * rot - Matrix3::identity()).norm() < 1e-10);
        prop_assert!((rot.determinant() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn exp_of_negation_is_the_inverse(
        x in -3.0f64..3.0,
        y in -3.0f64..3.0,
        z in -3.0f64..3.0,
    ) {
        let v = Vector3::new(x, y, z);
        let product = so3_exp(&v) * so3_exp(&(-v));
        prop_assert!((product - Matrix3::identity()).norm() < 1e-10);
    }
}
