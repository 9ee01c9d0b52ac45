//! Per-pixel warp-field layers: translational, affine and SE(2) optic flow,
//! slanted-plane disparity, and per-pixel Sim3 / 10-DoF 3D transforms.
//!
//! The 2D layers turn a per-pixel parameter field into sampling coordinates
//! over the base pixel lattice (raw pixel indices, not normalized); the 3D
//! layers act pointwise on a [`PointCloudGrid`]. Channel layouts:
//!
//! - flow field: `(t_x, t_y)`
//! - affine field: `(a0, a1, a2, a3, a4, a5)`, row-major 2×3
//! - SE(2) field: `(θ, t_x, t_y)`
//! - plane-disparity field: `(a, b, c)` with `d = a·x + b·y + c`
//! - per-pixel Sim3 field: `(v1, v2, v3, t1, t2, t3, s)`
//! - per-pixel 10-DoF field: `(v1..3, t1..3, p1..3, s)` computing
//!   `x' = s·(R·(x − p) + p) + t`
//!
//! Every backward pass returns a gradient field of the same layout.

use nalgebra::Vector3;

use crate::camera::PointCloudGrid;
use crate::error::{Error, Result};
use crate::grid::{ScalarGrid, VectorGrid};
use crate::lie::{so3_backward, so3_exp};
use crate::robust::RobustLoss;

/// Per-pixel translational optic flow `(t_x, t_y)`.
pub type FlowField = VectorGrid;
/// Per-pixel affine flow parameters `(a0..a5)`.
pub type AffineField = VectorGrid;
/// Per-pixel SE(2) parameters `(θ, t_x, t_y)`.
pub type Se2Field = VectorGrid;
/// Per-pixel plane coefficients `(a, b, c)` for disparity `d = ax + by + c`.
pub type PlaneDisparityField = VectorGrid;
/// Per-pixel Sim3 parameters `(v, t, s)`.
pub type PixelSim3Field = VectorGrid;
/// Per-pixel 10-DoF parameters `(v, t, p, s)`.
pub type Pixel10DofField = VectorGrid;

fn expect_channels(field: &VectorGrid, channels: usize, context: &'static str) -> Result<()> {
    if field.channels() != channels {
        return Err(Error::shape(
            context,
            format!("{channels} channels"),
            format!("{} channels", field.channels()),
        ));
    }
    Ok(())
}

fn expect_same_shape(
    field: &VectorGrid,
    points: &PointCloudGrid,
    context: &'static str,
) -> Result<()> {
    if field.height() != points.height() || field.width() != points.width() {
        return Err(Error::shape(
            context,
            format!("{}x{}", points.height(), points.width()),
            format!("{}x{}", field.height(), field.width()),
        ));
    }
    Ok(())
}

/// `(x + t_x, y + t_y)` per pixel.
pub fn flow_translation(field: &FlowField) -> Result<VectorGrid> {
    expect_channels(field, 2, "flow_translation")?;
    let mut coords = VectorGrid::zeros(field.height(), field.width(), 2)?;
    for r in 0..field.height() {
        for c in 0..field.width() {
            coords.set(r, c, 0, c as f64 + field.get(r, c, 0));
            coords.set(r, c, 1, r as f64 + field.get(r, c, 1));
        }
    }
    Ok(coords)
}

/// Identity Jacobian: upstream coordinate gradients pass through unchanged.
pub fn flow_translation_backward(grad_coords: &VectorGrid) -> Result<FlowField> {
    expect_channels(grad_coords, 2, "flow_translation_backward")?;
    Ok(grad_coords.clone())
}

/// `x' = a0·x + a1·y + a2`, `y' = a3·x + a4·y + a5` per pixel.
pub fn flow_affine(field: &AffineField) -> Result<VectorGrid> {
    expect_channels(field, 6, "flow_affine")?;
    let mut coords = VectorGrid::zeros(field.height(), field.width(), 2)?;
    for r in 0..field.height() {
        for c in 0..field.width() {
            let (x, y) = (c as f64, r as f64);
            coords.set(
                r,
                c,
                0,
                field.get(r, c, 0) * x + field.get(r, c, 1) * y + field.get(r, c, 2),
            );
            coords.set(
                r,
                c,
                1,
                field.get(r, c, 3) * x + field.get(r, c, 4) * y + field.get(r, c, 5),
            );
        }
    }
    Ok(coords)
}

/// Gradients of the affine parameters: `(gx·x, gx·y, gx, gy·x, gy·y, gy)`
/// where `(gx, gy)` is the upstream coordinate gradient and `(x, y)` the
/// pixel's base-grid coordinate.
pub fn flow_affine_backward(grad_coords: &VectorGrid) -> Result<AffineField> {
    expect_channels(grad_coords, 2, "flow_affine_backward")?;
    let mut grad = VectorGrid::zeros(grad_coords.height(), grad_coords.width(), 6)?;
    for r in 0..grad_coords.height() {
        for c in 0..grad_coords.width() {
            let (x, y) = (c as f64, r as f64);
            let gx = grad_coords.get(r, c, 0);
            let gy = grad_coords.get(r, c, 1);
            grad.set(r, c, 0, gx * x);
            grad.set(r, c, 1, gx * y);
            grad.set(r, c, 2, gx);
            grad.set(r, c, 3, gy * x);
            grad.set(r, c, 4, gy * y);
            grad.set(r, c, 5, gy);
        }
    }
    Ok(grad)
}

/// Embeds a translational flow field into the affine layout of the 2-DoF
/// special case `(1, 0, t_x, 0, 1, t_y)`.
pub fn embed_translation_as_affine(field: &FlowField) -> Result<AffineField> {
    expect_channels(field, 2, "embed_translation_as_affine")?;
    let mut affine = VectorGrid::zeros(field.height(), field.width(), 6)?;
    for r in 0..field.height() {
        for c in 0..field.width() {
            affine.set(r, c, 0, 1.0);
            affine.set(r, c, 2, field.get(r, c, 0));
            affine.set(r, c, 4, 1.0);
            affine.set(r, c, 5, field.get(r, c, 1));
        }
    }
    Ok(affine)
}

/// `(x', y') = Rot(θ)·(x, y) + (t_x, t_y)` per pixel.
pub fn flow_se2(field: &Se2Field) -> Result<VectorGrid> {
    expect_channels(field, 3, "flow_se2")?;
    let mut coords = VectorGrid::zeros(field.height(), field.width(), 2)?;
    for r in 0..field.height() {
        for c in 0..field.width() {
            let (x, y) = (c as f64, r as f64);
            let (sin_t, cos_t) = field.get(r, c, 0).sin_cos();
            coords.set(r, c, 0, cos_t * x - sin_t * y + field.get(r, c, 1));
            coords.set(r, c, 1, sin_t * x + cos_t * y + field.get(r, c, 2));
        }
    }
    Ok(coords)
}

/// Backward pass of [`flow_se2`] by the chain rule through cos θ / sin θ.
pub fn flow_se2_backward(field: &Se2Field, grad_coords: &VectorGrid) -> Result<Se2Field> {
    expect_channels(field, 3, "flow_se2_backward")?;
    expect_channels(grad_coords, 2, "flow_se2_backward")?;
    if field.height() != grad_coords.height() || field.width() != grad_coords.width() {
        return Err(Error::shape(
            "flow_se2_backward",
            format!("{}x{}", field.height(), field.width()),
            format!("{}x{}", grad_coords.height(), grad_coords.width()),
        ));
    }
    let mut grad = VectorGrid::zeros(field.height(), field.width(), 3)?;
    for r in 0..field.height() {
        for c in 0..field.width() {
            let (x, y) = (c as f64, r as f64);
            let (sin_t, cos_t) = field.get(r, c, 0).sin_cos();
            let gx = grad_coords.get(r, c, 0);
            let gy = grad_coords.get(r, c, 1);
            grad.set(
                r,
                c,
                0,
                gx * (-sin_t * x - cos_t * y) + gy * (cos_t * x - sin_t * y),
            );
            grad.set(r, c, 1, gx);
            grad.set(r, c, 2, gy);
        }
    }
    Ok(grad)
}

/// `d = a·x + b·y + c` per pixel.
pub fn plane_disparity(field: &PlaneDisparityField) -> Result<ScalarGrid> {
    expect_channels(field, 3, "plane_disparity")?;
    let mut disparity = ScalarGrid::zeros(field.height(), field.width())?;
    for r in 0..field.height() {
        for c in 0..field.width() {
            let (x, y) = (c as f64, r as f64);
            disparity.set(
                r,
                c,
                field.get(r, c, 0) * x + field.get(r, c, 1) * y + field.get(r, c, 2),
            );
        }
    }
    Ok(disparity)
}

/// Gradients of the plane coefficients: `(g·x, g·y, g)`.
pub fn plane_disparity_backward(grad_disparity: &ScalarGrid) -> Result<PlaneDisparityField> {
    let mut grad = VectorGrid::zeros(grad_disparity.height(), grad_disparity.width(), 3)?;
    for r in 0..grad_disparity.height() {
        for c in 0..grad_disparity.width() {
            let g = grad_disparity.get(r, c);
            grad.set(r, c, 0, g * c as f64);
            grad.set(r, c, 1, g * r as f64);
            grad.set(r, c, 2, g);
        }
    }
    Ok(grad)
}

/// Converts a disparity map into the horizontal stereo sampling grid
/// `(x − d, y)`.
pub fn disparity_to_sample_grid(disparity: &ScalarGrid) -> Result<VectorGrid> {
    let mut coords = VectorGrid::zeros(disparity.height(), disparity.width(), 2)?;
    for r in 0..disparity.height() {
        for c in 0..disparity.width() {
            coords.set(r, c, 0, c as f64 - disparity.get(r, c));
            coords.set(r, c, 1, r as f64);
        }
    }
    Ok(coords)
}

fn pixel_scale(field: &VectorGrid, r: usize, c: usize, channel: usize) -> Result<f64> {
    let s = field.get(r, c, channel);
    if s <= 0.0 || s.is_nan() {
        return Err(Error::ParamDomain(format!(
            "per-pixel scale must be positive, got {s} at pixel ({r}, {c})"
        )));
    }
    Ok(s)
}

/// `x' = s·R(v)·x + t` per pixel; invalid points pass through as the
/// sentinel and stay flagged invalid.
pub fn pixel_sim3(field: &PixelSim3Field, points: &PointCloudGrid) -> Result<PointCloudGrid> {
    expect_channels(field, 7, "pixel_sim3")?;
    expect_same_shape(field, points, "pixel_sim3")?;
    let mut out = PointCloudGrid::zeros(points.height(), points.width())?;
    for r in 0..points.height() {
        for c in 0..points.width() {
            if !points.is_valid(r, c) {
                out.set_point(r, c, &Vector3::zeros(), false);
                continue;
            }
            let v = Vector3::new(field.get(r, c, 0), field.get(r, c, 1), field.get(r, c, 2));
            let t = Vector3::new(field.get(r, c, 3), field.get(r, c, 4), field.get(r, c, 5));
            let s = pixel_scale(field, r, c, 6)?;
            let p = s * (so3_exp(&v) * points.point(r, c)) + t;
            out.set_point(r, c, &p, true);
        }
    }
    Ok(out)
}

/// Backward pass of [`pixel_sim3`]: gradients for all 7 field channels plus
/// the input points (`(s·R)ᵀ·g` per pixel).
pub fn pixel_sim3_backward(
    field: &PixelSim3Field,
    points: &PointCloudGrid,
    grad_points: &VectorGrid,
) -> Result<(PixelSim3Field, VectorGrid)> {
    expect_channels(field, 7, "pixel_sim3_backward")?;
    expect_channels(grad_points, 3, "pixel_sim3_backward")?;
    expect_same_shape(field, points, "pixel_sim3_backward")?;
    let mut grad_field = VectorGrid::zeros(field.height(), field.width(), 7)?;
    let mut grad_input = VectorGrid::zeros(field.height(), field.width(), 3)?;
    for r in 0..points.height() {
        for c in 0..points.width() {
            if !points.is_valid(r, c) {
                continue;
            }
            let v = Vector3::new(field.get(r, c, 0), field.get(r, c, 1), field.get(r, c, 2));
            let s = pixel_scale(field, r, c, 6)?;
            let rot = so3_exp(&v);
            let x = points.point(r, c);
            let g = Vector3::new(
                grad_points.get(r, c, 0),
                grad_points.get(r, c, 1),
                grad_points.get(r, c, 2),
            );
            // x' = s·R·x + t: dC/dR = s·g·xᵀ, dC/ds = g·(R·x), dC/dt = g.
            let grad_rot = s * g * x.transpose();
            let grad_v = so3_backward(&v, &rot, &grad_rot);
            let grad_x = s * rot.transpose() * g;
            for i in 0..3 {
                grad_field.set(r, c, i, grad_v[i]);
                grad_field.set(r, c, 3 + i, g[i]);
                grad_input.set(r, c, i, grad_x[i]);
            }
            grad_field.set(r, c, 6, g.dot(&(rot * x)));
        }
    }
    Ok((grad_field, grad_input))
}

/// `x' = s·(R(v)·(x − p) + p) + t` per pixel: rotation about a jointly
/// estimated anchor point `p`.
pub fn pixel_10dof(field: &Pixel10DofField, points: &PointCloudGrid) -> Result<PointCloudGrid> {
    expect_channels(field, 10, "pixel_10dof")?;
    expect_same_shape(field, points, "pixel_10dof")?;
    let mut out = PointCloudGrid::zeros(points.height(), points.width())?;
    for r in 0..points.height() {
        for c in 0..points.width() {
            if !points.is_valid(r, c) {
                out.set_point(r, c, &Vector3::zeros(), false);
                continue;
            }
            let v = Vector3::new(field.get(r, c, 0), field.get(r, c, 1), field.get(r, c, 2));
            let t = Vector3::new(field.get(r, c, 3), field.get(r, c, 4), field.get(r, c, 5));
            let p = Vector3::new(field.get(r, c, 6), field.get(r, c, 7), field.get(r, c, 8));
            let s = pixel_scale(field, r, c, 9)?;
            let x = points.point(r, c);
            let out_p = s * (so3_exp(&v) * (x - p) + p) + t;
            out.set_point(r, c, &out_p, true);
        }
    }
    Ok(out)
}

/// Backward pass of [`pixel_10dof`] over all 10 channels; the anchor
/// gradient uses `dx'/dp = s·(I − R)`.
pub fn pixel_10dof_backward(
    field: &Pixel10DofField,
    points: &PointCloudGrid,
    grad_points: &VectorGrid,
) -> Result<(Pixel10DofField, VectorGrid)> {
    expect_channels(field, 10, "pixel_10dof_backward")?;
    expect_channels(grad_points, 3, "pixel_10dof_backward")?;
    expect_same_shape(field, points, "pixel_10dof_backward")?;
    let mut grad_field = VectorGrid::zeros(field.height(), field.width(), 10)?;
    let mut grad_input = VectorGrid::zeros(field.height(), field.width(), 3)?;
    for r in 0..points.height() {
        for c in 0..points.width() {
            if !points.is_valid(r, c) {
                continue;
            }
            let v = Vector3::new(field.get(r, c, 0), field.get(r, c, 1), field.get(r, c, 2));
            let p = Vector3::new(field.get(r, c, 6), field.get(r, c, 7), field.get(r, c, 8));
            let s = pixel_scale(field, r, c, 9)?;
            let rot = so3_exp(&v);
            let x = points.point(r, c);
            let centered = x - p;
            let g = Vector3::new(
                grad_points.get(r, c, 0),
                grad_points.get(r, c, 1),
                grad_points.get(r, c, 2),
            );
            let grad_rot = s * g * centered.transpose();
            let grad_v = so3_backward(&v, &rot, &grad_rot);
            let grad_x = s * rot.transpose() * g;
            let grad_anchor = s * (nalgebra::Matrix3::identity() - rot).transpose() * g;
            for i in 0..3 {
                grad_field.set(r, c, i, grad_v[i]);
                grad_field.set(r, c, 3 + i, g[i]);
                grad_field.set(r, c, 6 + i, grad_anchor[i]);
                grad_input.set(r, c, i, grad_x[i]);
            }
            grad_field.set(r, c, 9, g.dot(&(rot * centered + p)));
        }
    }
    Ok((grad_field, grad_input))
}

/// Robust smoothness penalty over forward differences of a parameter field:
/// `Σ_pixels Σ_{right,down} ρ(Δfield)` summed over channels, with its
/// gradient field.
pub fn smoothness_penalty(field: &VectorGrid, loss: &RobustLoss) -> Result<(f64, VectorGrid)> {
    let mut cost = 0.0;
    let mut grad = VectorGrid::zeros(field.height(), field.width(), field.channels())?;
    for r in 0..field.height() {
        for c in 0..field.width() {
            for ch in 0..field.channels() {
                let here = field.get(r, c, ch);
                if c + 1 < field.width() {
                    let delta = field.get(r, c + 1, ch) - here;
                    cost += loss.rho(delta);
                    let psi = loss.psi(delta);
                    grad.set(r, c, ch, grad.get(r, c, ch) - psi);
                    grad.set(r, c + 1, ch, grad.get(r, c + 1, ch) + psi);
                }
                if r + 1 < field.height() {
                    let delta = field.get(r + 1, c, ch) - here;
                    cost += loss.rho(delta);
                    let psi = loss.psi(delta);
                    grad.set(r, c, ch, grad.get(r, c, ch) - psi);
                    grad.set(r + 1, c, ch, grad.get(r + 1, c, ch) + psi);
                }
            }
        }
    }
    Ok((cost, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    fn lattice_points(height: usize, width: usize) -> PointCloudGrid {
        let mut cloud = PointCloudGrid::zeros(height, width).unwrap();
        for r in 0..height {
            for c in 0..width {
                let p = Vector3::new(
                    c as f64 * 0.1 - 0.3,
                    r as f64 * 0.2 - 0.1,
                    1.0 + (r + c) as f64 * 0.05,
                );
                cloud.set_point(r, c, &p, true);
            }
        }
        cloud
    }

    #[test]
    fn zero_flow_is_identity_grid() {
        let field = make_grid(3, 4, 2, 0.0).unwrap();
        let coords = flow_translation(&field).unwrap();
        for r in 0..3 {
            for c in 0..4 {
                assert_eq!(coords.get(r, c, 0), c as f64);
                assert_eq!(coords.get(r, c, 1), r as f64);
            }
        }
    }

    #[test]
    fn constant_flow_shifts_x() {
        let mut field = make_grid(2, 2, 2, 0.0).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                field.set(r, c, 0, 1.0);
            }
        }
        let coords = flow_translation(&field).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert_eq!(coords.get(r, c, 0), c as f64 + 1.0);
                assert_eq!(coords.get(r, c, 1), r as f64);
            }
        }
    }

    #[test]
    fn translation_backward_is_identity() {
        let mut grad = make_grid(2, 2, 2, 0.0).unwrap();
        grad.set(1, 0, 0, 3.0);
        grad.set(1, 0, 1, -2.0);
        let out = flow_translation_backward(&grad).unwrap();
        assert_eq!(out, grad);
    }

    #[test]
    fn identity_affine_params_give_identity_grid() {
        let mut field = make_grid(3, 3, 6, 0.0).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                field.set(r, c, 0, 1.0);
                field.set(r, c, 4, 1.0);
            }
        }
        let coords = flow_affine(&field).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(coords.get(r, c, 0), c as f64);
                assert_eq!(coords.get(r, c, 1), r as f64);
            }
        }
    }

    #[test]
    fn affine_embedding_matches_translation_exactly() {
        let mut field = make_grid(4, 5, 2, 0.0).unwrap();
        for r in 0..4 {
            for c in 0..5 {
                field.set(r, c, 0, (r as f64) * 0.3 - 0.7);
                field.set(r, c, 1, (c as f64) * -0.2 + 0.4);
            }
        }
        let direct = flow_translation(&field).unwrap();
        let embedded = flow_affine(&embed_translation_as_affine(&field).unwrap()).unwrap();
        assert_eq!(direct, embedded);
    }

    #[test]
    fn affine_backward_at_origin_pixel() {
        let mut grad_coords = make_grid(1, 1, 2, 0.0).unwrap();
        grad_coords.set(0, 0, 0, 2.0);
        grad_coords.set(0, 0, 1, -3.0);
        let grad = flow_affine_backward(&grad_coords).unwrap();
        // Base coordinate (0,0) kills the linear terms.
        assert_eq!(grad.get(0, 0, 0), 0.0);
        assert_eq!(grad.get(0, 0, 1), 0.0);
        assert_eq!(grad.get(0, 0, 2), 2.0);
        assert_eq!(grad.get(0, 0, 3), 0.0);
        assert_eq!(grad.get(0, 0, 4), 0.0);
        assert_eq!(grad.get(0, 0, 5), -3.0);
    }

    #[test]
    fn se2_quarter_turn_moves_unit_x_to_unit_y() {
        let mut field = make_grid(1, 2, 3, 0.0).unwrap();
        for c in 0..2 {
            field.set(0, c, 0, std::f64::consts::FRAC_PI_2);
        }
        let coords = flow_se2(&field).unwrap();
        // Pixel (x=1, y=0) maps to (0, 1).
        assert!((coords.get(0, 1, 0) - 0.0).abs() < 1e-15);
        assert!((coords.get(0, 1, 1) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn se2_zero_is_identity() {
        let field = make_grid(2, 3, 3, 0.0).unwrap();
        let coords = flow_se2(&field).unwrap();
        for r in 0..2 {
            for c in 0..3 {
                assert_eq!(coords.get(r, c, 0), c as f64);
                assert_eq!(coords.get(r, c, 1), r as f64);
            }
        }
    }

    #[test]
    fn plane_disparity_cases() {
        let mut field = make_grid(8, 8, 3, 0.0).unwrap();
        for r in 0..8 {
            for c in 0..8 {
                field.set(r, c, 2, 5.0);
            }
        }
        let d = plane_disparity(&field).unwrap();
        assert!(d.data().iter().all(|&v| v == 5.0));

        let mut field = make_grid(8, 8, 3, 0.0).unwrap();
        for r in 0..8 {
            for c in 0..8 {
                field.set(r, c, 0, 1.0);
            }
        }
        let d = plane_disparity(&field).unwrap();
        assert_eq!(d.get(7, 3), 3.0);
    }

    #[test]
    fn disparity_grid_shifts_left() {
        let d = ScalarGrid::filled(2, 3, 1.5).unwrap();
        let coords = disparity_to_sample_grid(&d).unwrap();
        assert_eq!(coords.get(0, 2, 0), 0.5);
        assert_eq!(coords.get(1, 2, 1), 1.0);
    }

    #[test]
    fn pixel_sim3_identity_and_scale() {
        let points = lattice_points(3, 3);
        let mut field = make_grid(3, 3, 7, 0.0).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                field.set(r, c, 6, 1.0);
            }
        }
        let out = pixel_sim3(&field, &points).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert!((out.point(r, c) - points.point(r, c)).norm() < 1e-15);
            }
        }

        for r in 0..3 {
            for c in 0..3 {
                field.set(r, c, 6, 2.0);
            }
        }
        let out = pixel_sim3(&field, &points).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                assert!((out.point(r, c) - 2.0 * points.point(r, c)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn pixel_sim3_rejects_non_positive_scale() {
        let points = lattice_points(2, 2);
        let field = make_grid(2, 2, 7, 0.0).unwrap();
        let err = pixel_sim3(&field, &points).unwrap_err();
        assert!(err.to_string().contains("(0, 0)"));
    }

    #[test]
    fn pixel_10dof_anchor_cancels_at_identity_rotation() {
        let points = lattice_points(3, 3);
        let mut field = make_grid(3, 3, 10, 0.0).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                field.set(r, c, 3, 0.5); // t_x
                field.set(r, c, 6, 9.0); // anchor far away
                field.set(r, c, 7, -4.0);
                field.set(r, c, 8, 2.0);
                field.set(r, c, 9, 1.0);
            }
        }
        let out = pixel_10dof(&field, &points).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                let expected = points.point(r, c) + Vector3::new(0.5, 0.0, 0.0);
                assert!((out.point(r, c) - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn pixel_10dof_anchor_at_point_is_fixed_point() {
        let points = lattice_points(2, 2);
        let mut field = make_grid(2, 2, 10, 0.0).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                let p = points.point(r, c);
                field.set(r, c, 0, 0.4); // arbitrary rotation
                field.set(r, c, 1, -0.2);
                field.set(r, c, 2, 0.9);
                field.set(r, c, 6, p.x);
                field.set(r, c, 7, p.y);
                field.set(r, c, 8, p.z);
                field.set(r, c, 9, 1.0);
            }
        }
        let out = pixel_10dof(&field, &points).unwrap();
        for r in 0..2 {
            for c in 0..2 {
                assert!((out.point(r, c) - points.point(r, c)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn pixel_10dof_with_zero_anchor_matches_pixel_sim3() {
        let points = lattice_points(3, 2);
        let mut sim3_field = make_grid(3, 2, 7, 0.0).unwrap();
        let mut dof_field = make_grid(3, 2, 10, 0.0).unwrap();
        for r in 0..3 {
            for c in 0..2 {
                let params = [0.2, -0.4, 0.1, 0.3, -0.2, 0.6];
                for (i, &p) in params.iter().enumerate() {
                    sim3_field.set(r, c, i, p);
                    dof_field.set(r, c, i, p);
                }
                sim3_field.set(r, c, 6, 1.7);
                dof_field.set(r, c, 9, 1.7);
            }
        }
        let a = pixel_sim3(&sim3_field, &points).unwrap();
        let b = pixel_10dof(&dof_field, &points).unwrap();
        for r in 0..3 {
            for c in 0..2 {
                assert!((a.point(r, c) - b.point(r, c)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn smoothness_penalty_is_zero_for_constant_fields() {
        let field = make_grid(4, 4, 2, 3.5).unwrap();
        let loss = RobustLoss::new(crate::robust::LossKind::Huber);
        let (cost, grad) = smoothness_penalty(&field, &loss).unwrap();
        assert_eq!(cost, 0.0);
        assert!(grad.data().iter().all(|&v| v == 0.0));
    }
}
