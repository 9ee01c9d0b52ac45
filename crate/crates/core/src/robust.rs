//! Robust M-estimators: ρ(x), its derivative ψ(x), and the IRLS weight
//! ψ(x)/x, applied scalar-wise or over residual grids.
//!
//! The catalog covers L2, Huber, Cauchy, Geman-McClure and Tukey. Scale
//! constants default to the classical 95%-Gaussian-efficiency values
//! (Huber ε = 1.345, Cauchy c = 2.385, Tukey c = 4.685) and can always be
//! overridden; L2 and Geman-McClure take no scale.

use crate::error::{Error, Result};
use crate::grid::ScalarGrid;

/// Estimator family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    L2,
    Huber,
    Cauchy,
    GemanMcClure,
    Tukey,
}

impl LossKind {
    /// All five kinds, handy for sweeping tests.
    pub const ALL: [LossKind; 5] = [
        LossKind::L2,
        LossKind::Huber,
        LossKind::Cauchy,
        LossKind::GemanMcClure,
        LossKind::Tukey,
    ];

    fn default_scale(self) -> f64 {
        match self {
            LossKind::Huber => 1.345,
            LossKind::Cauchy => 2.385,
            LossKind::Tukey => 4.685,
            // Unused by these kinds; kept positive so the invariant holds.
            LossKind::L2 | LossKind::GemanMcClure => 1.0,
        }
    }
}

impl std::str::FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(LossKind::L2),
            "huber" => Ok(LossKind::Huber),
            "cauchy" => Ok(LossKind::Cauchy),
            "geman-mcclure" | "geman_mcclure" | "geman" => Ok(LossKind::GemanMcClure),
            "tukey" => Ok(LossKind::Tukey),
            other => Err(Error::Config(format!(
                "unknown loss kind '{other}' (expected l2|huber|cauchy|geman-mcclure|tukey)"
            ))),
        }
    }
}

/// An estimator kind plus its scale constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RobustLoss {
    kind: LossKind,
    scale: f64,
}

impl RobustLoss {
    /// Estimator with its classical default scale.
    pub fn new(kind: LossKind) -> Self {
        RobustLoss {
            kind,
            scale: kind.default_scale(),
        }
    }

    /// Estimator with an explicit scale (ε for Huber, c for Cauchy/Tukey).
    pub fn with_scale(kind: LossKind, scale: f64) -> Result<Self> {
        if scale <= 0.0 || !scale.is_finite() {
            return Err(Error::ParamDomain(format!(
                "robust-loss scale must be positive, got {scale}"
            )));
        }
        Ok(RobustLoss { kind, scale })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// ρ(x).
    pub fn rho(&self, x: f64) -> f64 {
        let s = self.scale;
        match self.kind {
            LossKind::L2 => 0.5 * x * x,
            LossKind::Huber => {
                if x.abs() <= s {
                    0.5 * x * x
                } else {
                    s * (x.abs() - 0.5 * s)
                }
            }
            LossKind::Cauchy => {
                let r = x / s;
                0.5 * s * s * (1.0 + r * r).ln()
            }
            LossKind::GemanMcClure => 0.5 * x * x / (1.0 + x * x),
            LossKind::Tukey => {
                let c2_6 = s * s / 6.0;
                if x.abs() <= s {
                    let r = x / s;
                    let term = 1.0 - r * r;
                    c2_6 * (1.0 - term * term * term)
                } else {
                    c2_6
                }
            }
        }
    }

    /// ψ(x) = ρ'(x).
    pub fn psi(&self, x: f64) -> f64 {
        let s = self.scale;
        match self.kind {
            LossKind::L2 => x,
            LossKind::Huber => {
                // The |x| <= ε branch also covers x = 0, avoiding x/|x|.
                if x.abs() <= s {
                    x
                } else {
                    s * x.signum()
                }
            }
            LossKind::Cauchy => {
                let r = x / s;
                x / (1.0 + r * r)
            }
            LossKind::GemanMcClure => {
                let d = 1.0 + x * x;
                x / (d * d)
            }
            LossKind::Tukey => {
                if x.abs() <= s {
                    let r = x / s;
                    let term = 1.0 - r * r;
                    x * term * term
                } else {
                    0.0
                }
            }
        }
    }

    /// IRLS weight ψ(x)/x with the analytic limit 1 at x = 0.
    pub fn weight(&self, x: f64) -> f64 {
        if x == 0.0 {
            return 1.0;
        }
        let s = self.scale;
        match self.kind {
            LossKind::L2 => 1.0,
            LossKind::Huber => {
                if x.abs() <= s {
                    1.0
                } else {
                    s / x.abs()
                }
            }
            LossKind::Cauchy => {
                let r = x / s;
                1.0 / (1.0 + r * r)
            }
            LossKind::GemanMcClure => {
                let d = 1.0 + x * x;
                1.0 / (d * d)
            }
            LossKind::Tukey => {
                if x.abs() <= s {
                    let r = x / s;
                    let term = 1.0 - r * r;
                    term * term
                } else {
                    0.0
                }
            }
        }
    }
}

/// Masked robust cost over a residual grid.
///
/// Returns `cost = Σ mask·ρ(r)` (row-major sequential sum) and the
/// elementwise gradient grid `mask·ψ(r)`.
pub fn apply_rho_grid(
    loss: &RobustLoss,
    residuals: &ScalarGrid,
    mask: &ScalarGrid,
) -> Result<(f64, ScalarGrid)> {
    if !residuals.same_shape(mask) {
        return Err(Error::shape(
            "apply_rho_grid",
            format!("{}x{}", residuals.height(), residuals.width()),
            format!("{}x{}", mask.height(), mask.width()),
        ));
    }
    let mut cost = 0.0;
    let mut grad = ScalarGrid::zeros(residuals.height(), residuals.width())?;
    for r in 0..residuals.height() {
        for c in 0..residuals.width() {
            let m = mask.get(r, c);
            let x = residuals.get(r, c);
            cost += m * loss.rho(x);
            grad.set(r, c, m * loss.psi(x));
        }
    }
    Ok((cost, grad))
}
