//! M-estimator properties: ψ = dρ/dx, symmetry, branch continuity,
//! monotonicity and the near-zero quadratic equivalence.

mod common;

use geowarp_core::{LossKind, RobustLoss};

fn losses() -> Vec<RobustLoss> {
    LossKind::ALL.iter().map(|&k| RobustLoss::new(k)).collect()
}

#[test]
fn psi_is_the_derivative_of_rho() {
    let step = 1e-6;
    for loss in losses() {
        let scale = loss.scale();
        let mut checked = 0;
        for i in 0..1000 {
            // 1000 points over [−5·scale, 5·scale].
            let x = (-5.0 + 10.0 * (i as f64 + 0.5) / 1000.0) * scale;
            // Exclude the Huber/Tukey branch points at |x| = scale.
            if (x.abs() - scale).abs() < 1e-3 * scale {
                continue;
            }
            // A symmetric difference around 0 is fine, but the relative
            // error of two near-zero numbers is noise; skip |x| ~ 0.
            if x.abs() < 1e-3 * scale {
                continue;
            }
            let numeric = (loss.rho(x + step) - loss.rho(x - step)) / (2.0 * step);
            let analytic = loss.psi(x);
            let denom = analytic.abs().max(numeric.abs()).max(1e-10);
            let err = (analytic - numeric).abs() / denom;
            assert!(
                err < 1e-5,
                "{:?} at x = {x}: psi {analytic} vs fd {numeric} (rel {err})",
                loss.kind()
            );
            checked += 1;
        }
        assert!(
            checked > 900,
            "{:?}: only {checked} points checked",
            loss.kind()
        );
    }
}

#[test]
fn rho_is_even_and_psi_is_odd_exactly() {
    for loss in losses() {
        for i in 0..200 {
            let x = (i as f64 - 100.0) * 0.07 * loss.scale();
            assert_eq!(loss.rho(-x), loss.rho(x), "{:?} rho at {x}", loss.kind());
            assert_eq!(loss.psi(-x), -loss.psi(x), "{:?} psi at {x}", loss.kind());
        }
    }
}

#[test]
fn rho_is_monotone_in_magnitude() {
    for loss in losses() {
        let mut prev = 0.0;
        for i in 0..=2000 {
            let x = i as f64 / 2000.0 * 6.0 * loss.scale();
            let value = loss.rho(x);
            assert!(
                value >= prev - 1e-15,
                "{:?}: rho({x}) = {value} < {prev}",
                loss.kind()
            );
            prev = value;
        }
    }
}

#[test]
fn branches_are_continuous() {
    // Continuity at the branch point: both closed forms evaluated at
    // |x| = scale must agree within 1e-12. The inner-branch values come
    // from the implementation (|x| <= scale side); the outer-branch
    // formulas are written out here.
    for scale in [0.5, 1.345, 2.0, 4.685] {
        let huber = RobustLoss::with_scale(LossKind::Huber, scale).unwrap();
        for sign in [-1.0f64, 1.0] {
            let at = sign * scale;
            let outer_rho = scale * (at.abs() - scale / 2.0);
            let outer_psi = scale * at.signum();
            assert!((huber.rho(at) - outer_rho).abs() < 1e-12);
            assert!((huber.psi(at) - outer_psi).abs() < 1e-12);
        }

        let tukey = RobustLoss::with_scale(LossKind::Tukey, scale).unwrap();
        for sign in [-1.0f64, 1.0] {
            let at = sign * scale;
            let outer_rho = scale * scale / 6.0;
            assert!((tukey.rho(at) - outer_rho).abs() < 1e-12);
            assert!(tukey.psi(at).abs() < 1e-12);
        }
    }
}

#[test]
fn near_zero_every_kind_is_quadratic() {
    for loss in losses() {
        let scale = loss.scale();
        for i in 1..=50 {
            let x = i as f64 / 50.0 * 1e-3 * scale;
            let ratio = loss.rho(x) / (0.5 * x * x);
            assert!(
                (0.999..=1.001).contains(&ratio),
                "{:?} at x = {x}: ratio {ratio}",
                loss.kind()
            );
        }
    }
}

#[test]
fn weight_limit_at_zero_is_one() {
    for loss in losses() {
        assert_eq!(loss.weight(0.0), 1.0);
        let tiny = 1e-9 * loss.scale();
        assert!((loss.weight(tiny) - 1.0).abs() < 1e-6);
    }
}
