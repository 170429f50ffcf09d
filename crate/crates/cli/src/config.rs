//! Run configuration. Every field has a default; `config/defaults.toml` lists them all.

use bdie_core::coefficient::{CoefficientField, CoefficientKind, ConditionThresholds};
use bdie_core::geometry::{CurveKind, CurveParametrization};
use bdie_core::system::{Discretization, SolverOptions};
use bdie_core::verification::{manufactured_case, CaseParams, Level, ManufacturedCase};
use bdie_core::volume::VolumeOptions;
use bdie_core::{BdieError, Vec2};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Solve,
    Verify,
    Convergence,
    Conditioning,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Verify => "verify",
            Command::Convergence => "convergence",
            Command::Conditioning => "conditioning",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Filled from the command line; a value in the file is overridden.
    pub command: Option<Command>,
    pub seed: u64,
    /// Worker threads for assembly; 0 uses all cores.
    pub threads: usize,
    pub output_dir: String,
    pub curve: CurveKind,
    /// Overrides the coefficient of a manufactured case when present.
    pub coefficient: Option<CoefficientSpec>,
    pub data: DataSpec,
    pub discretization: DiscretizationSpec,
    pub volume: VolumeOptions,
    pub solver: SolverOptions,
    pub tolerances: Tolerances,
    pub convergence: ConvergenceSpec,
    pub conditioning: ConditioningSpec,
    pub verify: VerifySpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: None,
            seed: 0,
            threads: 0,
            output_dir: "bdie-out".into(),
            curve: CurveKind::Circle { radius: 1.0 },
            coefficient: None,
            data: DataSpec::default(),
            discretization: DiscretizationSpec::default(),
            volume: VolumeOptions::default(),
            solver: SolverOptions::default(),
            tolerances: Tolerances::default(),
            convergence: ConvergenceSpec::default(),
            conditioning: ConditioningSpec::default(),
            verify: VerifySpec::default(),
        }
    }
}

/// Serializable subset of [`CoefficientKind`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientSpec {
    Constant { value: f64 },
    GaussianBump { beta: f64, sigma: f64, #[serde(default)] center: Vec2 },
    CompactBump { beta: f64, sigma: f64, #[serde(default)] center: Vec2 },
}

impl CoefficientSpec {
    pub fn field(&self) -> Result<CoefficientField, BdieError> {
        CoefficientField::from_kind(match *self {
            CoefficientSpec::Constant { value } => CoefficientKind::Constant { value },
            CoefficientSpec::GaussianBump { beta, sigma, center } => CoefficientKind::GaussianBump { beta, sigma, center },
            CoefficientSpec::CompactBump { beta, sigma, center } => CoefficientKind::CompactBump { beta, sigma, center },
        })
    }
}

/// A manufactured case, or a pair of catalog data. A complete pair takes precedence over `case`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSpec {
    pub case: Option<String>,
    pub params: CaseParams,
    /// Source catalog name (used when `case` is absent).
    pub source: Option<String>,
    /// Dirichlet catalog name (used when `case` is absent).
    pub dirichlet: Option<String>,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self { case: Some("laplace-dipole".into()), params: CaseParams::default(), source: None, dirichlet: None }
    }
}

pub const SOURCE_NAMES: [&str; 3] = ["zero", "gaussian", "gaussian-mode"];
pub const DIRICHLET_NAMES: [&str; 5] = ["zero", "cos", "sin2", "cos3", "dipole"];

pub fn source_fn(name: &str) -> Result<bdie_core::system::ScalarFn, BdieError> {
    Ok(match name {
        "zero" => std::sync::Arc::new(|_| 0.0),
        // positive mass: rejected by the compatibility check
        "gaussian" => std::sync::Arc::new(|x: Vec2| (-x.norm_sq()).exp()),
        "gaussian-mode" => std::sync::Arc::new(|x: Vec2| x.x * (-x.norm_sq()).exp()),
        other => return Err(BdieError::UnknownName(other.into())),
    })
}

pub fn dirichlet_fn(name: &str) -> Result<bdie_core::system::ScalarFn, BdieError> {
    Ok(match name {
        "zero" => std::sync::Arc::new(|_| 0.0),
        "cos" => std::sync::Arc::new(|x: Vec2| x.angle().cos()),
        "sin2" => std::sync::Arc::new(|x: Vec2| (2.0 * x.angle()).sin()),
        "cos3" => std::sync::Arc::new(|x: Vec2| (3.0 * x.angle()).cos()),
        "dipole" => std::sync::Arc::new(|x: Vec2| x.x / x.norm_sq()),
        other => return Err(BdieError::UnknownName(other.into())),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiscretizationSpec {
    pub n: usize,
    pub h: f64,
    pub r_trunc: f64,
    pub radial_order: usize,
    pub support_margin: f64,
}

impl Default for DiscretizationSpec {
    fn default() -> Self {
        Self { n: 128, h: 0.05, r_trunc: 5.5, radial_order: 8, support_margin: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub compatibility: f64,
    /// Abort with status 3 when a sampled coefficient condition fails.
    pub enforce_conditions: bool,
    pub conditions: ConditionThresholds,
    pub mean_zero: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { compatibility: 1e-8, enforce_conditions: true, conditions: ConditionThresholds::default(), mean_zero: 1e-10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConvergenceSpec {
    pub levels: Vec<Level>,
    pub min_order: f64,
}

impl Default for ConvergenceSpec {
    fn default() -> Self {
        Self {
            levels: vec![Level { n: 32, h: 0.2 }, Level { n: 64, h: 0.1 }, Level { n: 128, h: 0.05 }],
            min_order: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditioningSpec {
    pub ns: Vec<usize>,
    /// Exterior mesh spacing held fixed across the study.
    pub h: f64,
    pub max_ratio: f64,
    pub max_sigma_spread: f64,
}

impl Default for ConditioningSpec {
    fn default() -> Self {
        Self { ns: vec![32, 64, 128, 256], h: 0.2, max_ratio: 2.0, max_sigma_spread: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    pub split_radii: Vec<f64>,
    pub split_h: f64,
    pub split_r_trunc: f64,
    pub green_tolerance: f64,
    pub psi_tolerance: f64,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self { split_radii: vec![2.0, 3.0, 4.0], split_h: 0.2, split_r_trunc: 6.0, green_tolerance: 1e-5, psi_tolerance: 1e-3 }
    }
}

/// Problem inputs resolved from a validated config.
#[derive(Clone)]
pub struct Resolved {
    pub curve: CurveParametrization,
    pub field: CoefficientField,
    pub case: Option<ManufacturedCase>,
    pub source: bdie_core::system::ScalarFn,
    pub dirichlet: bdie_core::system::ScalarFn,
}

impl std::fmt::Debug for Resolved {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Resolved").field("curve", &self.curve).field("field", &self.field).field("case", &self.case).finish_non_exhaustive()
    }
}

fn invalid(msg: impl Into<String>) -> BdieError {
    BdieError::InvalidDiscretization(msg.into())
}

fn check_n(n: usize, what: &str) -> Result<(), BdieError> {
    if n < 8 || n % 2 != 0 {
        return Err(invalid(format!("{what}: boundary node count must be even and >= 8, got {n}")));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        Self::from_toml(&text)
    }

    pub fn discretization(&self) -> Discretization {
        let d = &self.discretization;
        Discretization {
            n: d.n,
            r_trunc: d.r_trunc,
            h: d.h,
            radial_order: d.radial_order,
            support_margin: d.support_margin,
            volume: self.volume,
        }
    }

    /// Range checks plus resolution of catalog names.
    pub fn resolve(&self) -> Result<Resolved, BdieError> {
        let d = &self.discretization;
        check_n(d.n, "discretization.n")?;
        if !(d.h > 0.0 && d.h.is_finite()) {
            return Err(invalid(format!("discretization.h must be positive, got {}", d.h)));
        }
        if d.radial_order < 2 || !(d.support_margin >= 0.0) {
            return Err(invalid("discretization.radial_order must be >= 2 and support_margin >= 0"));
        }
        let v = &self.volume;
        if !(v.min_cutoff > 0.0) || !(v.cutoff_spacings > 0.0) || v.radial_points < 2 || v.angular_points < 8 {
            return Err(invalid("volume options out of range"));
        }
        let s = &self.solver;
        if !(s.tolerance > 0.0) || s.restart == 0 || s.max_iterations == 0 {
            return Err(invalid("solver tolerance, restart and max_iterations must be positive"));
        }
        let t = &self.tolerances;
        if !(t.compatibility >= 0.0) || !(t.mean_zero > 0.0) {
            return Err(invalid("tolerances must be non-negative"));
        }
        for lv in &self.convergence.levels {
            check_n(lv.n, "convergence.levels")?;
            if !(lv.h > 0.0) {
                return Err(invalid("convergence.levels: h must be positive"));
            }
        }
        for &n in &self.conditioning.ns {
            check_n(n, "conditioning.ns")?;
        }
        if !(self.conditioning.h > 0.0) {
            return Err(invalid("conditioning.h must be positive"));
        }
        if self.verify.split_radii.windows(2).any(|w| w[1] <= w[0]) || !(self.verify.split_h > 0.0) {
            return Err(invalid("verify.split_radii must increase and split_h must be positive"));
        }
        let curve = CurveParametrization::new(self.curve)?;
        let rc = curve.circumradius();
        if !(d.r_trunc > rc) {
            return Err(BdieError::Geometry(format!(
                "discretization.r_trunc = {} must exceed the curve circumradius {rc:.6}",
                d.r_trunc
            )));
        }
        let explicit = self.coefficient.map(|c| c.field()).transpose()?;
        let data = &self.data;
        match (&data.case, &data.source, &data.dirichlet) {
            (_, Some(src), Some(dir)) => Ok(Resolved {
                curve,
                field: match explicit {
                    Some(f) => f,
                    None => CoefficientField::constant(1.0)?,
                },
                case: None,
                source: source_fn(src)?,
                dirichlet: dirichlet_fn(dir)?,
            }),
            (Some(name), None, None) => {
                let mut case = manufactured_case(name, &data.params)?;
                if let Some(field) = explicit {
                    case = case.with_field(field);
                }
                Ok(Resolved {
                    curve,
                    field: case.field.clone(),
                    source: std::sync::Arc::new({
                        let c = case.clone();
                        move |x| c.source(x)
                    }),
                    dirichlet: std::sync::Arc::new({
                        let c = case.clone();
                        move |x| c.u(x)
                    }),
                    case: Some(case),
                })
            }
            _ => Err(invalid("data: give `case`, or both `source` and `dirichlet`")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_defaults_match() {
        let text = include_str!("../../../config/defaults.toml");
        assert_eq!(RunConfig::from_toml(text).unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("[discretization]\nnn = 4\n").is_err());
        assert!(RunConfig::from_toml("bogus = 1\n").is_err());
    }

    #[test]
    fn validation_categories() {
        let mut c = RunConfig::default();
        c.discretization.r_trunc = 0.5;
        assert!(matches!(c.resolve(), Err(BdieError::Geometry(_))));
        let mut c = RunConfig::default();
        c.discretization.n = 7;
        assert!(matches!(c.resolve(), Err(BdieError::InvalidDiscretization(_))));
        let mut c = RunConfig::default();
        c.data.case = Some("nope".into());
        assert!(matches!(c.resolve(), Err(BdieError::UnknownName(_))));
        let mut c = RunConfig::default();
        c.data.source = Some("zero".into());
        assert!(c.resolve().is_err());
    }

    #[test]
    fn coefficient_override_recomputes_source() {
        let mut c = RunConfig::default();
        c.coefficient = Some(CoefficientSpec::GaussianBump { beta: 1.0, sigma: 1.0, center: Vec2::ZERO });
        let r = c.resolve().unwrap();
        let x = Vec2::new(1.3, 0.4);
        let bump = manufactured_case("bump-dipole", &CaseParams::default()).unwrap();
        assert!(((r.source)(x) - bump.source(x)).abs() < 1e-15);
    }
}
