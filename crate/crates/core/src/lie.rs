//! Exponential-map layers for SO3, SE3 and Sim3 with analytic backward
//! passes, plus quaternion and Euler-angle rotation parameterizations.
//!
//! Rotations are parameterized by a 3×1 axis-angle vector `v` whose magnitude
//! is the rotation angle; the forward pass is the Rodrigues formula
//! `R(v) = exp([v]×)`. The backward pass computes, for an upstream gradient
//! `G = dC/dR`, the pulled-back gradient
//!
//! ```text
//! dC/dv_i = <G, dR/dv_i>,
//! dR/dv_i = (v_i [v]× + [v × (I − R) e_i]×) / ||v||² · R
//! ```
//!
//! with the elementwise-product-then-sum reduction. Below
//! [`SMALL_ANGLE_THRESHOLD`] both the forward coefficients and the backward
//! derivative switch to their series limits: the forward uses the 2nd-order
//! Taylor expansion, the backward uses the generator `[e_i]×` at identity.
//!
//! SE3 composes rotation and translation independently as the 3×4 block
//! matrix `[R | t]`; the translation is the raw vector, not the coupled
//! `V·u` of the full SE3 exponential. Sim3 adds a positive scale: `[s·R | t]`.

use nalgebra::{Matrix3, Matrix3x4, SVector, Vector2, Vector3, Vector4, Vector6};

use crate::error::{Error, Result};

/// Rotation angle (radians) below which series limits replace the closed
/// forms, which divide by `||v||²` and are singular at v = 0.
pub const SMALL_ANGLE_THRESHOLD: f64 = 1e-8;

/// 3×4 rigid or similarity transform `[A | t]` acting on homogeneous points.
pub type TransformMatrix = Matrix3x4<f64>;

/// Skew-symmetric matrix `[v]×` such that `[v]× u = v × u`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(
        0.0, -v.z, v.y, //
        v.z, 0.0, -v.x, //
        -v.y, v.x, 0.0,
    )
}

/// Rodrigues formula: `R = I + sinθ/θ [v]× + (1−cosθ)/θ² [v]×²`, θ = ‖v‖.
pub fn so3_exp(v: &Vector3<f64>) -> Matrix3<f64> {
    let theta_sq = v.norm_squared();
    let k = skew(v);
    let (a, b) = if theta_sq.sqrt() < SMALL_ANGLE_THRESHOLD {
        // 2nd-order Taylor of sinθ/θ and (1−cosθ)/θ².
        (1.0 - theta_sq / 6.0, 0.5 - theta_sq / 24.0)
    } else {
        let theta = theta_sq.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta_sq)
    };
    Matrix3::identity() + a * k + b * (k * k)
}

/// Pulls an upstream gradient `grad_rot = dC/dR` back to the axis-angle
/// vector; `rot` must be `so3_exp(v)`.
pub fn so3_backward(v: &Vector3<f64>, rot: &Matrix3<f64>, grad_rot: &Matrix3<f64>) -> Vector3<f64> {
    let theta_sq = v.norm_squared();
    if theta_sq.sqrt() < SMALL_ANGLE_THRESHOLD {
        // Limit dR/dv_i → [e_i]× at the identity.
        return Vector3::new(
            grad_rot[(2, 1)] - grad_rot[(1, 2)],
            grad_rot[(0, 2)] - grad_rot[(2, 0)],
            grad_rot[(1, 0)] - grad_rot[(0, 1)],
        );
    }
    let k = skew(v);
    let eye_minus_r = Matrix3::identity() - rot;
    let mut grad = Vector3::zeros();
    for i in 0..3 {
        let col = eye_minus_r.column(i).into_owned(); // (I − R) e_i
        let d_rot = (v[i] * k + skew(&v.cross(&col))) * rot / theta_sq;
        grad[i] = grad_rot.component_mul(&d_rot).sum();
    }
    grad
}

/// Minimal SE3 parameters: axis-angle rotation plus raw translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Se3Params {
    pub rotation: Vector3<f64>,
    pub translation: Vector3<f64>,
}

impl Se3Params {
    pub fn new(rotation: Vector3<f64>, translation: Vector3<f64>) -> Self {
        Se3Params {
            rotation,
            translation,
        }
    }

    /// Six scalars ordered rotation-first, matching the pose-vector layout
    /// used throughout the crate.
    pub fn from_slice(p: &[f64]) -> Result<Self> {
        if p.len() != 6 {
            return Err(Error::ParamDomain(format!(
                "SE3 parameters need 6 components, got {}",
                p.len()
            )));
        }
        Ok(Se3Params::new(
            Vector3::new(p[0], p[1], p[2]),
            Vector3::new(p[3], p[4], p[5]),
        ))
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.rotation.x,
            self.rotation.y,
            self.rotation.z,
            self.translation.x,
            self.translation.y,
            self.translation.z,
        )
    }
}

/// `[R(v) | t]`.
pub fn se3_forward(p: &Se3Params) -> TransformMatrix {
    compose_transform(&so3_exp(&p.rotation), &p.translation)
}

/// Backward pass of [`se3_forward`]: the rotation block goes through
/// [`so3_backward`], the translation gradient is the last column verbatim.
pub fn se3_backward(p: &Se3Params, grad_transform: &TransformMatrix) -> Vector6<f64> {
    let rot = so3_exp(&p.rotation);
    let grad_rot_block = grad_transform.fixed_view::<3, 3>(0, 0).into_owned();
    let grad_v = so3_backward(&p.rotation, &rot, &grad_rot_block);
    Vector6::new(
        grad_v.x,
        grad_v.y,
        grad_v.z,
        grad_transform[(0, 3)],
        grad_transform[(1, 3)],
        grad_transform[(2, 3)],
    )
}

/// Sim3 parameters: rotation, translation and a positive uniform scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sim3Params {
    pub rotation: Vector3<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Sim3Params {
    pub fn new(rotation: Vector3<f64>, translation: Vector3<f64>, scale: f64) -> Self {
        Sim3Params {
            rotation,
            translation,
            scale,
        }
    }
}

/// `[s·R(v) | t]`; the scale must be strictly positive.
pub fn sim3_forward(p: &Sim3Params) -> Result<TransformMatrix> {
    if p.scale <= 0.0 || !p.scale.is_finite() {
        return Err(Error::ParamDomain(format!(
            "Sim3 scale must be positive, got {}",
            p.scale
        )));
    }
    let scaled = p.scale * so3_exp(&p.rotation);
    Ok(compose_transform(&scaled, &p.translation))
}

/// Backward pass of [`sim3_forward`]; gradient components are ordered
/// `(v1, v2, v3, t1, t2, t3, s)`.
pub fn sim3_backward(p: &Sim3Params, grad_transform: &TransformMatrix) -> SVector<f64, 7> {
    let rot = so3_exp(&p.rotation);
    let grad_block = grad_transform.fixed_view::<3, 3>(0, 0).into_owned();
    // Product rule over s·R: dC/ds = <G, R>, dC/dR = s·G.
    let grad_scale = grad_block.component_mul(&rot).sum();
    let grad_v = so3_backward(&p.rotation, &rot, &(p.scale * grad_block));
    SVector::<f64, 7>::from_column_slice(&[
        grad_v.x,
        grad_v.y,
        grad_v.z,
        grad_transform[(0, 3)],
        grad_transform[(1, 3)],
        grad_transform[(2, 3)],
        grad_scale,
    ])
}

/// Rotation parameterized by four quaternion components `(w, x, y, z)`.
///
/// Normalization happens inside the layer and is part of the differentiated
/// graph, so any non-zero quaternion is a valid input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quaternion { w, x, y, z }
    }

    pub fn norm_squared(&self) -> f64 {
        self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
    }
}

/// Homogeneous quaternion-to-rotation matrix; equals the unit-quaternion
/// formula evaluated at `q/‖q‖` but stays smooth in the raw components.
fn quat_matrix_unnormalized(q: &Quaternion) -> Matrix3<f64> {
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    Matrix3::new(
        w * w + x * x - y * y - z * z,
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        w * w - x * x + y * y - z * z,
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        w * w - x * x - y * y + z * z,
    )
}

/// Rotation matrix of the normalized quaternion.
pub fn quat_to_rotation(q: &Quaternion) -> Result<Matrix3<f64>> {
    let n_sq = q.norm_squared();
    if n_sq.sqrt() < 1e-12 {
        return Err(Error::ParamDomain(
            "quaternion norm below 1e-12 cannot be normalized".to_string(),
        ));
    }
    Ok(quat_matrix_unnormalized(q) / n_sq)
}

/// Backward pass of [`quat_to_rotation`], chained through the internal
/// normalization; returns gradients for `(w, x, y, z)`.
pub fn quat_backward(q: &Quaternion, grad_rot: &Matrix3<f64>) -> Result<Vector4<f64>> {
    let n_sq = q.norm_squared();
    if n_sq.sqrt() < 1e-12 {
        return Err(Error::ParamDomain(
            "quaternion norm below 1e-12 cannot be normalized".to_string(),
        ));
    }
    let rot = quat_matrix_unnormalized(q) / n_sq;
    let (w, x, y, z) = (q.w, q.x, q.y, q.z);
    // dM/dq_k of the unnormalized matrix; each entry is linear in q.
    let dm = [
        Matrix3::new(
            2.0 * w,
            -2.0 * z,
            2.0 * y, //
            2.0 * z,
            2.0 * w,
            -2.0 * x, //
            -2.0 * y,
            2.0 * x,
            2.0 * w,
        ),
        Matrix3::new(
            2.0 * x,
            2.0 * y,
            2.0 * z, //
            2.0 * y,
            -2.0 * x,
            -2.0 * w, //
            2.0 * z,
            2.0 * w,
            -2.0 * x,
        ),
        Matrix3::new(
            -2.0 * y,
            2.0 * x,
            2.0 * w, //
            2.0 * x,
            2.0 * y,
            2.0 * z, //
            -2.0 * w,
            2.0 * z,
            -2.0 * y,
        ),
        Matrix3::new(
            -2.0 * z,
            -2.0 * w,
            2.0 * x, //
            2.0 * w,
            -2.0 * z,
            2.0 * y, //
            2.0 * x,
            2.0 * y,
            2.0 * z,
        ),
    ];
    let comps = [w, x, y, z];
    let mut grad = Vector4::zeros();
    for k in 0..4 {
        // d(M/n²)/dq_k = (dM/dq_k − 2 q_k R) / n².
        let d_rot = (dm[k] - 2.0 * comps[k] * rot) / n_sq;
        grad[k] = grad_rot.component_mul(&d_rot).sum();
    }
    Ok(grad)
}

/// Euler angles with the fixed composition order `Rz(yaw)·Ry(pitch)·Rx(roll)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        EulerAngles { roll, pitch, yaw }
    }
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn d_rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(0.0, 0.0, 0.0, 0.0, -s, -c, 0.0, c, -s)
}

fn d_rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, 0.0, c, 0.0, 0.0, 0.0, -c, 0.0, -s)
}

fn d_rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(-s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 0.0)
}

/// `R = Rz(yaw)·Ry(pitch)·Rx(roll)`.
pub fn euler_to_rotation(e: &EulerAngles) -> Matrix3<f64> {
    rot_z(e.yaw) * rot_y(e.pitch) * rot_x(e.roll)
}

/// Backward pass of [`euler_to_rotation`] by the product rule through the
/// three factors; returns gradients for `(roll, pitch, yaw)`.
pub fn euler_backward(e: &EulerAngles, grad_rot: &Matrix3<f64>) -> Vector3<f64> {
    let rx = rot_x(e.roll);
    let ry = rot_y(e.pitch);
    let rz = rot_z(e.yaw);
    let d_roll = rz * ry * d_rot_x(e.roll);
    let d_pitch = rz * d_rot_y(e.pitch) * rx;
    let d_yaw = d_rot_z(e.yaw) * ry * rx;
    Vector3::new(
        grad_rot.component_mul(&d_roll).sum(),
        grad_rot.component_mul(&d_pitch).sum(),
        grad_rot.component_mul(&d_yaw).sum(),
    )
}

/// Assembles `[A | t]` from a 3×3 block and a translation column.
pub fn compose_transform(block: &Matrix3<f64>, translation: &Vector3<f64>) -> TransformMatrix {
    let mut t = TransformMatrix::zeros();
    t.fixed_view_mut::<3, 3>(0, 0).copy_from(block);
    t.fixed_view_mut::<3, 1>(0, 3).copy_from(translation);
    t
}

/// Left 3×3 block of a transform.
pub fn rotation_block(t: &TransformMatrix) -> Matrix3<f64> {
    t.fixed_view::<3, 3>(0, 0).into_owned()
}

/// Right translation column of a transform.
pub fn translation_block(t: &TransformMatrix) -> Vector3<f64> {
    Vector3::new(t[(0, 3)], t[(1, 3)], t[(2, 3)])
}

/// Applies `[A | t]` to a 3D point: `A·p + t`.
pub fn transform_point(t: &TransformMatrix, p: &Vector3<f64>) -> Vector3<f64> {
    rotation_block(t) * p + translation_block(t)
}

/// Inverse of a rigid `[R | t]`: `[Rᵀ | −Rᵀ t]`.
pub fn invert_rigid(t: &TransformMatrix) -> TransformMatrix {
    let rt = rotation_block(t).transpose();
    let neg_t = -(rt * translation_block(t));
    compose_transform(&rt, &neg_t)
}

/// Identity transform `[I | 0]`.
pub fn identity_transform() -> TransformMatrix {
    compose_transform(&Matrix3::identity(), &Vector3::zeros())
}

/// Geodesic rotation angle of `R` in radians, `acos((tr R − 1) / 2)` with the
/// argument clamped into [−1, 1].
pub fn rotation_angle(rot: &Matrix3<f64>) -> f64 {
    ((rot.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos()
}

#[allow(dead_code)]
pub(crate) fn pixel(x: f64, y: f64) -> Vector2<f64> {
    Vector2::new(x, y)
}
