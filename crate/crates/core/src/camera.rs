//! Pinhole projection with its 2×3 Jacobian, inverse projection from pixel
//! and depth, and the depth-driven 3D grid generator.
//!
//! Projection maps a 3D point `p = (u, v, w)` to the image plane as
//! `(fx·u/w + px, fy·v/w + py)`; the backward pass multiplies the upstream
//! pixel gradient by the Jacobian rows `(fx/w, 0, −fx·u/w²)` and
//! `(0, fy/w, −fy·v/w²)`. Points with `|w|` below the configured epsilon are
//! rejected in scalar paths and flagged invalid in grid paths, where they are
//! excluded from cost and gradients.
//!
//! Inverse projection lifts a pixel `(x, y)` with depth `d` to
//! `((x−px)/fx·d, (y−py)/fy·d, d)`; the grid generator applies it over the
//! full regular pixel lattice and transforms the result by `[A | t]`. Depth
//! value 0 is the in-band "invalid pixel" sentinel.

use nalgebra::{Vector2, Vector3};

use crate::error::{Error, Result};
use crate::grid::{ScalarGrid, VectorGrid};
use crate::lie::{rotation_block, translation_block, TransformMatrix};

/// Default minimum |w| (scene units) accepted by the projection layer.
pub const W_EPSILON: f64 = 1e-6;

/// Pinhole intrinsics in pixel units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub px: f64,
    pub py: f64,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, px: f64, py: f64) -> Result<Self> {
        if !(fx > 0.0 && fy > 0.0) || ![fx, fy, px, py].iter().all(|v| v.is_finite()) {
            return Err(Error::ParamDomain(format!(
                "focal lengths must be positive and finite, got fx={fx} fy={fy} px={px} py={py}"
            )));
        }
        Ok(CameraIntrinsics { fx, fy, px, py })
    }

    /// Intrinsics for an image downsampled by a factor of two.
    pub fn halved(&self) -> CameraIntrinsics {
        CameraIntrinsics {
            fx: self.fx / 2.0,
            fy: self.fy / 2.0,
            px: self.px / 2.0,
            py: self.py / 2.0,
        }
    }
}

/// `(fx·u/w + px, fy·v/w + py)` with the configured singularity threshold.
pub fn project_with_epsilon(
    point: &Vector3<f64>,
    k: &CameraIntrinsics,
    w_epsilon: f64,
) -> Result<Vector2<f64>> {
    if point.z.abs() < w_epsilon {
        return Err(Error::DepthSingularity {
            u: point.x,
            v: point.y,
            w: point.z,
            epsilon: w_epsilon,
        });
    }
    Ok(Vector2::new(
        k.fx * point.x / point.z + k.px,
        k.fy * point.y / point.z + k.py,
    ))
}

/// [`project_with_epsilon`] at the default [`W_EPSILON`].
pub fn project(point: &Vector3<f64>, k: &CameraIntrinsics) -> Result<Vector2<f64>> {
    project_with_epsilon(point, k, W_EPSILON)
}

/// Pulls an upstream pixel gradient back to the 3D point through the 2×3
/// projection Jacobian.
pub fn project_backward(
    point: &Vector3<f64>,
    k: &CameraIntrinsics,
    grad_pixel: &Vector2<f64>,
) -> Result<Vector3<f64>> {
    if point.z.abs() < W_EPSILON {
        return Err(Error::DepthSingularity {
            u: point.x,
            v: point.y,
            w: point.z,
            epsilon: W_EPSILON,
        });
    }
    let w = point.z;
    let w_sq = w * w;
    Ok(Vector3::new(
        grad_pixel.x * k.fx / w,
        grad_pixel.y * k.fy / w,
        -grad_pixel.x * k.fx * point.x / w_sq - grad_pixel.y * k.fy * point.y / w_sq,
    ))
}

/// Lifts a pixel to the 3D point `((x−px)/fx·d, (y−py)/fy·d, d)`.
pub fn inverse_project(
    pixel: &Vector2<f64>,
    depth: f64,
    k: &CameraIntrinsics,
) -> Result<Vector3<f64>> {
    if depth <= 0.0 || !depth.is_finite() {
        return Err(Error::InvalidDepth(depth));
    }
    Ok(ray_direction(pixel, k) * depth)
}

/// Unit-depth ray through a pixel: `((x−px)/fx, (y−py)/fy, 1)`.
pub fn ray_direction(pixel: &Vector2<f64>, k: &CameraIntrinsics) -> Vector3<f64> {
    Vector3::new((pixel.x - k.px) / k.fx, (pixel.y - k.py) / k.fy, 1.0)
}

/// Per-pixel 3D points with a validity mask (1 where the source depth was
/// valid, 0 where the sentinel point (0,0,0) was substituted).
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloudGrid {
    points: VectorGrid,
    valid: ScalarGrid,
}

impl PointCloudGrid {
    /// Pairs a 3-channel point grid with its validity mask; shapes must
    /// agree and the mask must be 0/1 valued.
    pub fn new(points: VectorGrid, valid: ScalarGrid) -> Result<Self> {
        if points.channels() != 3 {
            return Err(Error::shape(
                "PointCloudGrid::new",
                "3 channels".to_string(),
                format!("{} channels", points.channels()),
            ));
        }
        if points.height() != valid.height() || points.width() != valid.width() {
            return Err(Error::shape(
                "PointCloudGrid::new",
                format!("{}x{}", points.height(), points.width()),
                format!("{}x{}", valid.height(), valid.width()),
            ));
        }
        if valid.data().iter().any(|&m| m != 0.0 && m != 1.0) {
            return Err(Error::ParamDomain(
                "point-cloud validity mask must be 0/1 valued".to_string(),
            ));
        }
        Ok(PointCloudGrid { points, valid })
    }

    pub fn height(&self) -> usize {
        self.points.height()
    }

    pub fn width(&self) -> usize {
        self.points.width()
    }

    #[inline]
    pub fn point(&self, row: usize, col: usize) -> Vector3<f64> {
        Vector3::new(
            self.points.get(row, col, 0),
            self.points.get(row, col, 1),
            self.points.get(row, col, 2),
        )
    }

    #[inline]
    pub fn is_valid(&self, row: usize, col: usize) -> bool {
        self.valid.get(row, col) != 0.0
    }

    pub fn points(&self) -> &VectorGrid {
        &self.points
    }

    pub fn valid_mask(&self) -> &ScalarGrid {
        &self.valid
    }

    pub(crate) fn set_point(&mut self, row: usize, col: usize, p: &Vector3<f64>, valid: bool) {
        self.points.set(row, col, 0, p.x);
        self.points.set(row, col, 1, p.y);
        self.points.set(row, col, 2, p.z);
        self.valid.set(row, col, if valid { 1.0 } else { 0.0 });
    }

    pub(crate) fn zeros(height: usize, width: usize) -> Result<Self> {
        Ok(PointCloudGrid {
            points: VectorGrid::zeros(height, width, 3)?,
            valid: ScalarGrid::zeros(height, width)?,
        })
    }
}

/// Maps every pixel of the regular lattice to a transformed 3D point:
/// `T · homogeneous(inverse_project((x, y), depth(x, y)))`.
///
/// Pixels with depth ≤ 0 produce the sentinel (0,0,0) flagged invalid.
pub fn grid_generator_3d(
    depth: &ScalarGrid,
    k: &CameraIntrinsics,
    transform: &TransformMatrix,
) -> Result<PointCloudGrid> {
    let mut cloud = PointCloudGrid::zeros(depth.height(), depth.width())?;
    let a = rotation_block(transform);
    let t = translation_block(transform);
    for row in 0..depth.height() {
        for col in 0..depth.width() {
            let d = depth.get(row, col);
            if d > 0.0 {
                let ray = ray_direction(&Vector2::new(col as f64, row as f64), k);
                let p = a * (ray * d) + t;
                cloud.set_point(row, col, &p, true);
            } else {
                cloud.set_point(row, col, &Vector3::zeros(), false);
            }
        }
    }
    Ok(cloud)
}

/// Backward pass of [`grid_generator_3d`].
///
/// Returns the gradient with respect to the 3×4 transform (accumulated over
/// pixels in row-major order) and with respect to the depth map. Invalid
/// pixels contribute zero to both.
pub fn grid_generator_3d_backward(
    depth: &ScalarGrid,
    k: &CameraIntrinsics,
    transform: &TransformMatrix,
    grad_points: &VectorGrid,
) -> Result<(TransformMatrix, ScalarGrid)> {
    if grad_points.channels() != 3
        || grad_points.height() != depth.height()
        || grad_points.width() != depth.width()
    {
        return Err(Error::shape(
            "grid_generator_3d_backward",
            format!("{}x{}x3", depth.height(), depth.width()),
            format!(
                "{}x{}x{}",
                grad_points.height(),
                grad_points.width(),
                grad_points.channels()
            ),
        ));
    }
    let a = rotation_block(transform);
    let mut grad_transform = TransformMatrix::zeros();
    let mut grad_depth = ScalarGrid::zeros(depth.height(), depth.width())?;
    for row in 0..depth.height() {
        for col in 0..depth.width() {
            let d = depth.get(row, col);
            if d <= 0.0 {
                continue;
            }
            let g = Vector3::new(
                grad_points.get(row, col, 0),
                grad_points.get(row, col, 1),
                grad_points.get(row, col, 2),
            );
            let ray = ray_direction(&Vector2::new(col as f64, row as f64), k);
            let p_hat = ray * d;
            // point = A·p̂ + t, so dC/dA_ij = g_i · p̂_j and dC/dt_i = g_i.
            for i in 0..3 {
                for j in 0..3 {
                    grad_transform[(i, j)] += g[i] * p_hat[j];
                }
                grad_transform[(i, 3)] += g[i];
            }
            // p̂ is linear in depth: dC/dd = g · (A·ray).
            grad_depth.set(row, col, g.dot(&(a * ray)));
        }
    }
    Ok((grad_transform, grad_depth))
}
