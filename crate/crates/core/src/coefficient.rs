//! The diffusion coefficient `a(x)`, the exterior weight `omega_2` and sampled
//! checks of the boundedness and decay conditions placed on `a`.

use crate::error::{BdieError, Result};
use crate::geometry::DomainMesh;
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Below this gradient magnitude the coefficient is treated as constant.
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-10;

/// A scalar field with analytic gradient and Laplacian.
pub trait ScalarField: Send + Sync {
    fn value(&self, x: Vec2) -> f64;
    fn gradient(&self, x: Vec2) -> Vec2;
    fn laplacian(&self, x: Vec2) -> f64;
}

/// Catalog of built-in coefficients.
#[derive(Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoefficientKind {
    Constant {
        value: f64,
    },
    /// `1 + beta exp(-|x - c|^2 / sigma^2)`.
    GaussianBump {
        beta: f64,
        sigma: f64,
        #[serde(default)]
        center: Vec2,
    },
    /// `1 + beta q(|x - c| / sigma)` with `q(r) = (1 - r^2)^4` on `r < 1`, zero outside.
    CompactBump {
        beta: f64,
        sigma: f64,
        #[serde(default)]
        center: Vec2,
    },
    /// User-supplied closed form; not serializable.
    #[serde(skip)]
    Custom(Arc<dyn ScalarField>),
}

impl fmt::Debug for CoefficientKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant { value } => write!(f, "Constant({value})"),
            Self::GaussianBump { beta, sigma, center } => {
                write!(f, "GaussianBump(beta={beta}, sigma={sigma}, c=({}, {}))", center.x, center.y)
            }
            Self::CompactBump { beta, sigma, center } => {
                write!(f, "CompactBump(beta={beta}, sigma={sigma}, c=({}, {}))", center.x, center.y)
            }
            Self::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// The coefficient `a` together with its declared bounds and support radius.
#[derive(Debug, Clone)]
pub struct CoefficientField {
    pub kind: CoefficientKind,
    /// Declared lower bound `C1`.
    pub lower: f64,
    /// Declared upper bound `C2`.
    pub upper: f64,
    /// Radius outside which `|grad a|` is below the tail tolerance (0 for constants).
    pub support_radius: f64,
}

/// Values returned by [`coeff_eval`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSample {
    pub value: f64,
    pub gradient: Vec2,
    pub laplacian: f64,
}

impl CoefficientField {
    pub fn constant(value: f64) -> Result<Self> {
        if !(value > 0.0) {
            return Err(BdieError::Positivity { value, x: 0.0, y: 0.0 });
        }
        Ok(Self { kind: CoefficientKind::Constant { value }, lower: value, upper: value, support_radius: 0.0 })
    }

    pub fn gaussian_bump(beta: f64, sigma: f64, center: Vec2) -> Result<Self> {
        Self::gaussian_bump_with_tail(beta, sigma, center, DEFAULT_TAIL_TOLERANCE)
    }

    pub fn gaussian_bump_with_tail(beta: f64, sigma: f64, center: Vec2, tail: f64) -> Result<Self> {
        if !(beta > -1.0) || !(sigma > 0.0) {
            return Err(BdieError::Conditions(format!(
                "gaussian bump needs beta > -1 and sigma > 0 (got {beta}, {sigma})"
            )));
        }
        // |grad a| = 2|beta| r exp(-r^2/sigma^2) / sigma^2, decreasing for r > sigma/sqrt(2).
        let grad = |r: f64| 2.0 * beta.abs() * r * (-(r * r) / (sigma * sigma)).exp() / (sigma * sigma);
        let mut r = sigma / std::f64::consts::SQRT_2;
        if beta != 0.0 {
            while grad(r) > tail {
                r += 0.01 * sigma;
            }
        } else {
            r = 0.0;
        }
        Ok(Self {
            kind: CoefficientKind::GaussianBump { beta, sigma, center },
            lower: 1.0_f64.min(1.0 + beta),
            upper: 1.0_f64.max(1.0 + beta),
            support_radius: if beta == 0.0 { 0.0 } else { center.norm() + r },
        })
    }

    pub fn compact_bump(beta: f64, sigma: f64, center: Vec2) -> Result<Self> {
        if !(beta > -1.0) || !(sigma > 0.0) {
            return Err(BdieError::Conditions(format!(
                "compact bump needs beta > -1 and sigma > 0 (got {beta}, {sigma})"
            )));
        }
        Ok(Self {
            kind: CoefficientKind::CompactBump { beta, sigma, center },
            lower: 1.0_f64.min(1.0 + beta),
            upper: 1.0_f64.max(1.0 + beta),
            support_radius: if beta == 0.0 { 0.0 } else { center.norm() + sigma },
        })
    }

    pub fn custom(field: Arc<dyn ScalarField>, lower: f64, upper: f64, support_radius: f64) -> Self {
        Self { kind: CoefficientKind::Custom(field), lower, upper, support_radius }
    }

    pub fn from_kind(kind: CoefficientKind) -> Result<Self> {
        match kind {
            CoefficientKind::Constant { value } => Self::constant(value),
            CoefficientKind::GaussianBump { beta, sigma, center } => Self::gaussian_bump(beta, sigma, center),
            CoefficientKind::CompactBump { beta, sigma, center } => Self::compact_bump(beta, sigma, center),
            CoefficientKind::Custom(f) => Ok(Self::custom(f, f64::NAN, f64::NAN, f64::INFINITY)),
        }
    }

    /// True when the gradient vanishes identically.
    pub fn is_constant(&self) -> bool {
        match &self.kind {
            CoefficientKind::Constant { .. } => true,
            CoefficientKind::GaussianBump { beta, .. } | CoefficientKind::CompactBump { beta, .. } => *beta == 0.0,
            CoefficientKind::Custom(_) => false,
        }
    }

    #[inline]
    pub fn value(&self, x: Vec2) -> f64 {
        match &self.kind {
            CoefficientKind::Constant { value } => *value,
            CoefficientKind::GaussianBump { beta, sigma, center } => {
                1.0 + beta * (-(x - *center).norm_sq() / (sigma * sigma)).exp()
            }
            CoefficientKind::CompactBump { beta, sigma, center } => {
                let rho2 = (x - *center).norm_sq() / (sigma * sigma);
                if rho2 >= 1.0 {
                    1.0
                } else {
                    1.0 + beta * (1.0 - rho2).powi(4)
                }
            }
            CoefficientKind::Custom(f) => f.value(x),
        }
    }

    #[inline]
    pub fn gradient(&self, x: Vec2) -> Vec2 {
        match &self.kind {
            CoefficientKind::Constant { .. } => Vec2::ZERO,
            CoefficientKind::GaussianBump { beta, sigma, center } => {
                let d = x - *center;
                let s2 = sigma * sigma;
                d * (-2.0 * beta * (-d.norm_sq() / s2).exp() / s2)
            }
            CoefficientKind::CompactBump { beta, sigma, center } => {
                let d = x - *center;
                let s2 = sigma * sigma;
                let rho2 = d.norm_sq() / s2;
                if rho2 >= 1.0 {
                    Vec2::ZERO
                } else {
                    d * (-8.0 * beta * (1.0 - rho2).powi(3) / s2)
                }
            }
            CoefficientKind::Custom(f) => f.gradient(x),
        }
    }

    #[inline]
    pub fn laplacian(&self, x: Vec2) -> f64 {
        match &self.kind {
            CoefficientKind::Constant { .. } => 0.0,
            CoefficientKind::GaussianBump { beta, sigma, center } => {
                let s2 = sigma * sigma;
                let r2 = (x - *center).norm_sq();
                beta * (-r2 / s2).exp() * (4.0 * r2 / (s2 * s2) - 4.0 / s2)
            }
            CoefficientKind::CompactBump { beta, sigma, center } => {
                let s2 = sigma * sigma;
                let rho2 = (x - *center).norm_sq() / s2;
                if rho2 >= 1.0 {
                    0.0
                } else {
                    -16.0 * beta / s2 * (1.0 - rho2).powi(2) * (1.0 - 4.0 * rho2)
                }
            }
            CoefficientKind::Custom(f) => f.laplacian(x),
        }
    }

    /// `grad(ln a)`.
    #[inline]
    pub fn grad_log(&self, x: Vec2) -> Vec2 {
        self.gradient(x) * (1.0 / self.value(x))
    }

    /// `Laplacian(ln a) = Δa/a - |grad a|²/a²`.
    #[inline]
    pub fn laplacian_log(&self, x: Vec2) -> f64 {
        let a = self.value(x);
        self.laplacian(x) / a - self.gradient(x).norm_sq() / (a * a)
    }

    /// Value, gradient and Laplacian, rejecting non-positive values.
    pub fn eval(&self, x: Vec2) -> Result<CoefficientSample> {
        let value = self.value(x);
        if !(value > 0.0) {
            return Err(BdieError::Positivity { value, x: x.x, y: x.y });
        }
        Ok(CoefficientSample { value, gradient: self.gradient(x), laplacian: self.laplacian(x) })
    }
}

/// `coeff_eval` operation.
pub fn coeff_eval(field: &CoefficientField, x: Vec2) -> Result<CoefficientSample> {
    field.eval(x)
}

/// `omega_2(x) = (1 + |x|²)^(1/2) ln(2 + |x|²)`.
#[inline]
pub fn weight_eval(x: Vec2) -> f64 {
    let r2 = x.norm_sq();
    (1.0 + r2).sqrt() * (2.0 + r2).ln()
}

/// Pass/fail thresholds for [`check_conditions`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionThresholds {
    /// Maximum admissible sampled `sup omega_2 |grad a|`.
    pub weighted_gradient: f64,
    /// Maximum admissible sampled `sup omega_2² |Δa|`.
    pub weighted_laplacian: f64,
    /// Maximum admissible `omega_2 |grad a|` on the outermost ring.
    pub tail: f64,
}

impl Default for ConditionThresholds {
    fn default() -> Self {
        Self { weighted_gradient: 1e3, weighted_laplacian: 1e4, tail: 1e-6 }
    }
}

/// Sampled evidence for the boundedness and decay conditions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub min_value: f64,
    pub max_value: f64,
    pub positivity_ok: bool,
    pub sup_weighted_gradient: f64,
    pub sup_weighted_laplacian: f64,
    pub outer_ring_weighted_gradient: f64,
    pub outer_radius: f64,
    pub bounded_gradient_ok: bool,
    pub bounded_laplacian_ok: bool,
    pub decay_ok: bool,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.positivity_ok && self.bounded_gradient_ok && self.bounded_laplacian_ok && self.decay_ok
    }

    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.positivity_ok {
            out.push("positivity");
        }
        if !self.bounded_gradient_ok {
            out.push("weighted-gradient");
        }
        if !self.bounded_laplacian_ok {
            out.push("weighted-laplacian");
        }
        if !self.decay_ok {
            out.push("gradient-decay");
        }
        out
    }
}

/// Samples the conditions on the mesh nodes. Sampling can only falsify them.
pub fn check_conditions(
    field: &CoefficientField,
    mesh: &DomainMesh,
    thresholds: &ConditionThresholds,
) -> ConditionReport {
    let mut min_value = f64::INFINITY;
    let mut max_value = f64::NEG_INFINITY;
    let mut sup_g: f64 = 0.0;
    let mut sup_l: f64 = 0.0;
    for &p in &mesh.nodes {
        let a = field.value(p);
        min_value = min_value.min(a);
        max_value = max_value.max(a);
        let w = weight_eval(p);
        sup_g = sup_g.max(w * field.gradient(p).norm());
        sup_l = sup_l.max(w * w * field.laplacian(p).abs());
    }
    // The outer ring is sampled on the truncation circle itself.
    let n = mesh.nt.max(64) * 4;
    let r = mesh.outer_radius();
    let mut tail: f64 = 0.0;
    for k in 0..n {
        let p = Vec2::polar(r, 2.0 * std::f64::consts::PI * k as f64 / n as f64);
        tail = tail.max(weight_eval(p) * field.gradient(p).norm());
        sup_g = sup_g.max(weight_eval(p) * field.gradient(p).norm());
    }
    let lower_ok = !(field.lower > 0.0) || min_value >= field.lower * (1.0 - 1e-12);
    let upper_ok = !field.upper.is_finite() || max_value <= field.upper * (1.0 + 1e-12);
    ConditionReport {
        min_value,
        max_value,
        positivity_ok: min_value > 0.0 && lower_ok && upper_ok,
        sup_weighted_gradient: sup_g,
        sup_weighted_laplacian: sup_l,
        outer_ring_weighted_gradient: tail,
        outer_radius: r,
        bounded_gradient_ok: sup_g <= thresholds.weighted_gradient,
        bounded_laplacian_ok: sup_l <= thresholds.weighted_laplacian,
        decay_ok: tail <= thresholds.tail,
    }
}

/// Radial cutoff equal to 1 on `|x| <= r`, 0 on `|x| >= 2r`, blended by the
/// quintic smoothstep (C² at both seams).
#[inline]
pub fn quintic_cutoff(x: Vec2, r: f64) -> f64 {
    let xi = (x.norm() - r) / r;
    if xi <= 0.0 {
        1.0
    } else if xi >= 1.0 {
        0.0
    } else {
        1.0 - xi * xi * xi * (10.0 - 15.0 * xi + 6.0 * xi * xi)
    }
}
