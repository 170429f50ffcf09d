//! Manufactured solutions and numerical checks of the identities behind the
//! segregated system: Green identities, equivalence with the boundary value
//! problem, the remainder split and conditioning under refinement.

use crate::coefficient::{weight_eval, CoefficientField};
use crate::error::{BdieError, Result};
use crate::geometry::{BoundaryGrid, CurveParametrization, DomainMesh, MeshOptions};
use crate::laplace::{matvec, LayerPotentials};
use crate::parametrix::{
    conormal_derivative, layer_v, layer_w, remainder_r, remainder_row, remainder_weighting, BoundaryOperators,
    RemainderSplit,
};
use crate::system::{
    assemble_system, evaluate_u_field, solve, BdieSolution, DirichletProblem, Discretization, Discretized, ScalarFn,
    SolverOptions,
};
use crate::vec2::Vec2;
use crate::volume::{Target, VolumeOptions, VolumeQuadrature, Weighting};
use faer::Mat;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

pub type VectorFn = Arc<dyn Fn(Vec2) -> Vec2 + Send + Sync>;

pub const CASE_NAMES: [&str; 5] = ["laplace-dipole", "bump-dipole", "zero", "laplace-quadrupole", "bump-quadrupole"];

/// Far-field behaviour of a manufactured solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayClass {
    Zero,
    /// `O(1/r)`.
    Dipole,
    /// `O(1/r²)`.
    Quadrupole,
}

/// Parameters of the bump coefficient used by the `bump-*` cases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaseParams {
    pub beta: f64,
    pub sigma: f64,
    pub center: Vec2,
}

impl Default for CaseParams {
    fn default() -> Self {
        Self { beta: 1.0, sigma: 1.0, center: Vec2::ZERO }
    }
}

/// An exact solution with its coefficient and data.
#[derive(Clone)]
pub struct ManufacturedCase {
    pub name: String,
    pub field: CoefficientField,
    pub decay: DecayClass,
    u: ScalarFn,
    grad: VectorFn,
    source: ScalarFn,
}

impl std::fmt::Debug for ManufacturedCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ManufacturedCase")
            .field("name", &self.name)
            .field("field", &self.field)
            .field("decay", &self.decay)
            .finish_non_exhaustive()
    }
}

fn dipole() -> (ScalarFn, VectorFn) {
    (
        Arc::new(|x: Vec2| x.x / x.norm_sq()),
        Arc::new(|x: Vec2| {
            let r2 = x.norm_sq();
            Vec2::new((x.y * x.y - x.x * x.x) / (r2 * r2), -2.0 * x.x * x.y / (r2 * r2))
        }),
    )
}

fn quadrupole() -> (ScalarFn, VectorFn) {
    // (x1² - x2²)/r⁴ = Re(1/z²)
    (
        Arc::new(|x: Vec2| (x.x * x.x - x.y * x.y) / (x.norm_sq() * x.norm_sq())),
        Arc::new(|x: Vec2| {
            let r2 = x.norm_sq();
            let r6 = r2 * r2 * r2;
            let d = x.x * x.x - x.y * x.y;
            Vec2::new((2.0 * x.x * r2 - 4.0 * x.x * d) / r6, (-2.0 * x.y * r2 - 4.0 * x.y * d) / r6)
        }),
    )
}

/// `manufactured_case` operation.
pub fn manufactured_case(name: &str, params: &CaseParams) -> Result<ManufacturedCase> {
    let bump = || CoefficientField::gaussian_bump(params.beta, params.sigma, params.center);
    let (field, decay, (u, grad)) = match name {
        "laplace-dipole" => (CoefficientField::constant(1.0)?, DecayClass::Dipole, dipole()),
        "laplace-quadrupole" => (CoefficientField::constant(1.0)?, DecayClass::Quadrupole, quadrupole()),
        "bump-dipole" => (bump()?, DecayClass::Dipole, dipole()),
        "bump-quadrupole" => (bump()?, DecayClass::Quadrupole, quadrupole()),
        "zero" => {
            let u: ScalarFn = Arc::new(|_| 0.0);
            let g: VectorFn = Arc::new(|_| Vec2::ZERO);
            (CoefficientField::constant(1.0)?, DecayClass::Zero, (u, g))
        }
        other => return Err(BdieError::UnknownName(other.to_string())),
    };
    // every catalog solution is harmonic, so div(a grad u) = grad a · grad u
    let source: ScalarFn = if field.is_constant() {
        Arc::new(|_| 0.0)
    } else {
        let (fl, g) = (field.clone(), grad.clone());
        Arc::new(move |x| fl.gradient(x).dot(g(x)))
    };
    Ok(ManufacturedCase { name: name.to_string(), field, decay, u, grad, source })
}

/// Result of the internal consistency checks of a case.
#[derive(Debug, Clone, Serialize)]
pub struct CaseCheck {
    /// Max `|div(a grad u)_FD - f|` over the sample points, relative to the flux scale.
    pub source_fd_error: f64,
    pub mean_source: f64,
    pub mean_psi: f64,
}

impl CaseCheck {
    pub fn passed(&self, tol: f64) -> bool {
        self.source_fd_error <= 1e-6 && self.mean_source.abs() <= tol && self.mean_psi.abs() <= tol
    }
}

impl ManufacturedCase {
    /// The same exact solution under another coefficient.
    pub fn with_field(mut self, field: CoefficientField) -> Self {
        self.source = if field.is_constant() {
            Arc::new(|_| 0.0)
        } else {
            let (fl, g) = (field.clone(), self.grad.clone());
            Arc::new(move |x| fl.gradient(x).dot(g(x)))
        };
        self.field = field;
        self
    }

    pub fn u(&self, x: Vec2) -> f64 {
        (self.u)(x)
    }

    pub fn grad(&self, x: Vec2) -> Vec2 {
        (self.grad)(x)
    }

    pub fn source(&self, x: Vec2) -> f64 {
        (self.source)(x)
    }

    pub fn phi0(&self, grid: &BoundaryGrid) -> Vec<f64> {
        grid.sample(|x| self.u(x))
    }

    /// `T⁺u` at the grid nodes.
    pub fn psi_exact(&self, grid: &BoundaryGrid) -> Vec<f64> {
        conormal_derivative(|x| self.grad(x), grid, &self.field)
    }

    pub fn problem(&self, curve: &CurveParametrization, disc: Discretization, compatibility_tol: f64) -> DirichletProblem {
        DirichletProblem {
            curve: curve.clone(),
            field: self.field.clone(),
            source: self.source.clone(),
            dirichlet: self.u.clone(),
            disc,
            compatibility_tol,
        }
    }

    /// Finite-difference check of `f` at 20 random exterior points and the
    /// discrete means of `f` over `mesh` and of `T⁺u` over `grid`.
    pub fn check(&self, mesh: &DomainMesh, grid: &BoundaryGrid, seed: u64) -> CaseCheck {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let r0 = 1.05 * mesh.curve.circumradius();
        let flux = |x: Vec2| self.grad(x) * self.field.value(x);
        let h = 1e-3;
        let mut err: f64 = 0.0;
        let mut scale: f64 = 1e-300;
        for _ in 0..20 {
            let x = Vec2::polar(rng.random_range(r0..4.0), rng.random_range(0.0..2.0 * PI));
            let d = |e: Vec2, c: fn(Vec2) -> f64| {
                let f = |s: f64| c(flux(x + e * s));
                (8.0 * (f(h) - f(-h)) - (f(2.0 * h) - f(-2.0 * h))) / (12.0 * h)
            };
            let div = d(Vec2::new(1.0, 0.0), |v| v.x) + d(Vec2::new(0.0, 1.0), |v| v.y);
            err = err.max((div - self.source(x)).abs());
            scale = scale.max(flux(x).norm()).max(self.source(x).abs());
        }
        let f = mesh.sample(|x| self.source(x));
        CaseCheck {
            source_fd_error: err / scale,
            mean_source: mesh.integrate(&f),
            mean_psi: grid.weights.iter().zip(self.psi_exact(grid)).map(|(w, p)| w * p).sum(),
        }
    }
}

/// Residuals of the third Green identity and of its trace form.
#[derive(Debug, Clone, Serialize)]
pub struct GreenResiduals {
    pub points: Vec<[f64; 2]>,
    /// `|u + ℛu - VT⁺u + Wγ⁺u - 𝒫𝒜u|` at each point.
    pub third: Vec<f64>,
    /// Max over `S` of `|u/2 + γ⁺ℛu - 𝒱T⁺u + 𝒲γ⁺u - γ⁺𝒫𝒜u|`.
    pub trace_max: f64,
    pub third_max: f64,
}

/// Ten fixed probe points in the annulus `1.3 ρ < |x| < 3.5 ρ` with `ρ` the circumradius.
pub fn probe_points(curve: &CurveParametrization) -> Vec<Vec2> {
    let rc = curve.circumradius();
    (0..10)
        .map(|k| {
            let r = rc * (1.3 + 0.22 * k as f64);
            Vec2::polar(r, 0.37 + 2.0 * PI * 0.3819660112501051 * k as f64)
        })
        .collect()
}

/// `green_identity_residuals` operation.
pub fn green_identity_residuals(case: &ManufacturedCase, disc: &Discretized, points: &[Vec2]) -> GreenResiduals {
    let field = &case.field;
    let quad = &disc.quad;
    let mesh = &disc.mesh;
    let grid = &disc.grid;
    let u_nodes = mesh.sample(|x| case.u(x));
    let phi = case.phi0(grid);
    let psi = case.psi_exact(grid);
    let src = Weighting::new(mesh, |x| [case.source(x) / field.value(x), 0.0, 0.0]);
    let third: Vec<f64> = points
        .par_iter()
        .map(|&y| {
            let r = remainder_r(quad, &u_nodes, field, Target::Point(y));
            let v = layer_v(&disc.layers, &psi, &disc.ops.coeff, y);
            let w = layer_w(&disc.layers, &phi, &disc.ops.coeff, y);
            let p = quad.apply(Target::Point(y), &src);
            (case.u(y) + r - v + w - p).abs()
        })
        .collect();
    let vb = disc.ops.boundary_v(&psi);
    let wb = disc.ops.boundary_w(&phi);
    let trace: Vec<f64> = grid
        .t
        .par_iter()
        .enumerate()
        .map(|(k, &t)| {
            let r = remainder_r(quad, &u_nodes, field, Target::Boundary(t));
            let p = quad.apply(Target::Boundary(t), &src);
            (0.5 * phi[k] + r - vb[k] + wb[k] - p).abs()
        })
        .collect();
    GreenResiduals {
        points: points.iter().map(|p| [p.x, p.y]).collect(),
        third_max: third.iter().cloned().fold(0.0, f64::max),
        third,
        trace_max: trace.iter().cloned().fold(0.0, f64::max),
    }
}

/// Terms of `∫(u𝒜v - v𝒜u) = ∫_S (u T⁺v - v T⁺u) dS + ∫_{|x|=R} a(u ∂_r v - v ∂_r u) ds`.
#[derive(Debug, Clone, Serialize)]
pub struct SecondGreen {
    pub volume: f64,
    pub boundary: f64,
    /// Contribution of the truncation circle.
    pub outer: f64,
    pub residual: f64,
}

/// Second Green identity for two cases sharing a coefficient.
pub fn second_green_identity(u: &ManufacturedCase, v: &ManufacturedCase, disc: &Discretized) -> SecondGreen {
    let mesh = &disc.mesh;
    let vals = mesh.sample(|x| u.u(x) * v.source(x) - v.u(x) * u.source(x));
    let volume = mesh.integrate(&vals);
    let (tu, tv) = (u.psi_exact(&disc.grid), v.psi_exact(&disc.grid));
    let boundary = (0..disc.n_bnd())
        .map(|k| {
            let x = disc.grid.points[k];
            disc.grid.weights[k] * (u.u(x) * tv[k] - v.u(x) * tu[k])
        })
        .sum::<f64>();
    let big_r = mesh.r_trunc;
    let m = 1024;
    let outer = (0..m)
        .map(|k| {
            let e = Vec2::polar(1.0, 2.0 * PI * k as f64 / m as f64);
            let x = e * big_r;
            let a = u.field.value(x);
            a * (u.u(x) * v.grad(x).dot(e) - v.u(x) * u.grad(x).dot(e)) * big_r * 2.0 * PI / m as f64
        })
        .sum::<f64>();
    SecondGreen { volume, boundary, outer, residual: (volume - boundary - outer).abs() }
}

/// Errors of a computed solution against the exact one.
#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceReport {
    /// `‖ψ - T⁺u‖` in discrete `L²(S)`.
    pub psi_error: f64,
    pub psi_relative: f64,
    /// `‖u - u_exact‖` in the discrete weighted `L²` over the domain unknowns.
    pub u_error: f64,
    pub u_relative: f64,
    /// `‖𝒱_Δ(ψ - T⁺u)‖` in discrete `L²(S)`.
    pub single_layer_residual: f64,
    pub dirichlet_defect: f64,
    /// `|𝒜u - f|` by conservative finite differences of the reconstructed field.
    pub pde_residual: Vec<f64>,
    pub pde_points: Vec<[f64; 2]>,
}

fn rel(err: f64, norm: f64) -> f64 {
    if norm > 0.0 {
        err / norm
    } else {
        err
    }
}

/// Points where the PDE residual is evaluated.
pub fn pde_check_points(curve: &CurveParametrization) -> Vec<Vec2> {
    let rc = curve.circumradius();
    vec![Vec2::polar(1.6 * rc, 0.3), Vec2::polar(2.1 * rc, 2.2), Vec2::polar(2.7 * rc, 4.4)]
}

/// `equivalence_check` operation.
pub fn equivalence_check(
    case: &ManufacturedCase,
    problem: &DirichletProblem,
    disc: &Discretized,
    sol: &BdieSolution,
    pde_points: &[Vec2],
) -> Result<EquivalenceReport> {
    let grid = &disc.grid;
    let psi_ex = case.psi_exact(grid);
    let diff: Vec<f64> = sol.psi.iter().zip(&psi_ex).map(|(a, b)| a - b).collect();
    let psi_error = grid.norm(&diff);
    let mut num = 0.0;
    let mut den = 0.0;
    for (&i, u) in disc.unknowns.iter().zip(&sol.u) {
        let x = disc.mesh.nodes[i];
        let w = disc.mesh.weights[i];
        num += w * (u - case.u(x)).powi(2);
        den += w * case.u(x).powi(2);
    }
    let vres = matvec(&disc.ops.v_delta, &diff);
    let h = 0.5 * disc.mesh.h;
    let field = &case.field;
    let pde_residual = pde_points
        .par_iter()
        .map(|&y| -> Result<f64> {
            let u = |p: Vec2| evaluate_u_field(sol, problem, disc, p);
            let c = u(y)?;
            let mut div = 0.0;
            for e in [Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)] {
                let (up, um) = (u(y + e * h)?, u(y - e * h)?);
                div += field.value(y + e * (0.5 * h)) * (up - c) - field.value(y - e * (0.5 * h)) * (c - um);
            }
            Ok((div / (h * h) - case.source(y)).abs())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(EquivalenceReport {
        psi_error,
        psi_relative: rel(psi_error, grid.norm(&psi_ex)),
        u_error: num.sqrt(),
        u_relative: rel(num.sqrt(), den.sqrt()),
        single_layer_residual: grid.norm(&vres),
        dirichlet_defect: sol.lambda,
        pde_residual,
        pde_points: pde_points.iter().map(|p| [p.x, p.y]).collect(),
    })
}

/// One row of the split-decay table.
#[derive(Debug, Clone, Serialize)]
pub struct SplitRow {
    pub radius: f64,
    /// Power-iteration estimate of `‖ℛ_s‖` in the weighted `L²` norm.
    pub norm_smooth: f64,
    /// `sup_{|x| >= r} ω₂|∇a|`.
    pub factor: f64,
    /// `max |ℛ_s + ℛ_c - ℛ|`.
    pub split_defect: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitStudy {
    pub rows: Vec<SplitRow>,
    /// Smallest `C` with `‖ℛ_s‖ <= C · factor` for all radii.
    pub fitted_constant: f64,
    pub norms_decreasing: bool,
    pub factors_decreasing: bool,
}

/// Sampled `sup_{|x| >= r} ω₂(x)|∇a(x)|` on `r <= |x| <= r_max`.
pub fn weighted_gradient_tail(field: &CoefficientField, r: f64, r_max: f64) -> f64 {
    let (nr, na) = (400, 128);
    let mut sup: f64 = 0.0;
    for i in 0..=nr {
        let rho = r + (r_max - r) * i as f64 / nr as f64;
        for k in 0..na {
            let x = Vec2::polar(rho, 2.0 * PI * k as f64 / na as f64);
            sup = sup.max(weight_eval(x) * field.gradient(x).norm());
        }
    }
    sup
}

/// Largest singular value of `m` by power iteration on `mᵀm`.
pub fn power_norm(m: &Mat<f64>, iterations: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..m.ncols()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut est = 0.0;
    let mt = m.transpose().to_owned();
    for _ in 0..iterations {
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nx == 0.0 {
            return 0.0;
        }
        x.iter_mut().for_each(|v| *v /= nx);
        let y = matvec(m, &x);
        est = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        x = matvec(&mt, &y);
    }
    est
}

/// Full `ℛ` over all mesh nodes, in the weighted `L²` scaling `W^{1/2} ℛ W^{-1/2}`.
fn weighted_remainder_matrix(quad: &VolumeQuadrature, field: &CoefficientField) -> Mat<f64> {
    let n = quad.mesh.len();
    if field.is_constant() {
        return Mat::zeros(n, n);
    }
    let w = remainder_weighting(quad, field);
    let rows: Vec<Vec<f64>> = (0..n).into_par_iter().map(|i| remainder_row(quad, &w, field, Target::Node(i))).collect();
    let sw: Vec<f64> = quad.mesh.weights.iter().map(|w| w.sqrt()).collect();
    Mat::from_fn(n, n, |i, j| sw[i] * rows[i][j] / sw[j])
}

/// `split_decay_study` operation.
pub fn split_decay_study(
    field: &CoefficientField,
    quad: &VolumeQuadrature,
    radii: &[f64],
    seed: u64,
) -> Result<SplitStudy> {
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(BdieError::InvalidDiscretization("split radii must be increasing".into()));
    }
    let r = weighted_remainder_matrix(quad, field);
    let cols: Vec<usize> = (0..quad.mesh.len()).collect();
    let r_max = quad.mesh.r_trunc.max(field.support_radius) + 1.0;
    let mut rows = Vec::new();
    for &radius in radii {
        let split = RemainderSplit::new(quad, radius, &cols)?;
        let (rs, rc) = split.split(&r);
        let mut defect: f64 = 0.0;
        for j in 0..r.ncols() {
            for i in 0..r.nrows() {
                defect = defect.max((rs[(i, j)] + rc[(i, j)] - r[(i, j)]).abs());
            }
        }
        rows.push(SplitRow {
            radius,
            norm_smooth: power_norm(&rs, 20, seed),
            factor: weighted_gradient_tail(field, radius, r_max),
            split_defect: defect,
        });
    }
    let fitted_constant = rows.iter().map(|r| rel(r.norm_smooth, r.factor)).fold(0.0, f64::max);
    Ok(SplitStudy {
        norms_decreasing: rows.windows(2).all(|w| w[1].norm_smooth < w[0].norm_smooth),
        factors_decreasing: rows.windows(2).all(|w| w[1].factor < w[0].factor),
        fitted_constant,
        rows,
    })
}

/// Real symmetric circulant `Λ^s` with symbol `(1 + k²)^{s/2}` on an `n`-point periodic grid.
pub fn sobolev_scaling(n: usize, s: f64) -> Mat<f64> {
    let half = n / 2;
    let symbol = |k: usize| (1.0 + (k * k) as f64).powf(0.5 * s);
    let kernel: Vec<f64> = (0..n)
        .map(|d| {
            let th = 2.0 * PI * d as f64 / n as f64;
            let mut v = symbol(0);
            for k in 1..half {
                v += 2.0 * symbol(k) * (k as f64 * th).cos();
            }
            if n % 2 == 0 {
                v += symbol(half) * (half as f64 * th).cos();
            }
            v / n as f64
        })
        .collect();
    Mat::from_fn(n, n, |i, j| kernel[(i + n - j) % n])
}

/// Orthonormal basis of the complement of `c` (`n × (n-1)`).
fn complement_basis(c: &[f64]) -> Mat<f64> {
    let n = c.len();
    let nc = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut v: Vec<f64> = c.iter().map(|x| x / nc).collect();
    // Householder reflector mapping c/|c| to e_0
    v[0] -= 1.0;
    let nv = v.iter().map(|x| x * x).sum::<f64>();
    Mat::from_fn(n, n - 1, |i, j| {
        let col = j + 1;
        let delta = if i == col { 1.0 } else { 0.0 };
        if nv == 0.0 {
            delta
        } else {
            delta - 2.0 * v[i] * v[col] / nv
        }
    })
}

fn singular_values(m: &Mat<f64>) -> Result<Vec<f64>> {
    m.singular_values().map_err(|e| BdieError::Singular(format!("singular value decomposition failed: {e:?}")))
}

/// Singular values of `𝒱` on densities with `Σ w ψ = 0`, measured from
/// `H^{-1/2}` to `H^{1/2}` when `sobolev` is set and in the plain nodal norm otherwise.
pub fn mean_zero_single_layer_singular_values(ops: &BoundaryOperators, sobolev: bool) -> Result<Vec<f64>> {
    let n = ops.grid.len();
    let v = ops.single_layer();
    let m = if sobolev {
        let lam = sobolev_scaling(n, 0.5);
        let c = matvec(&lam, &ops.grid.weights);
        &lam * &v * &lam * complement_basis(&c)
    } else {
        &v * complement_basis(&ops.grid.weights)
    };
    singular_values(&m)
}

/// One row of the conditioning table.
#[derive(Debug, Clone, Serialize)]
pub struct ConditioningRow {
    pub n: usize,
    /// 2-norm condition number of the Sobolev-scaled system.
    pub cond_m: f64,
    /// Smallest Sobolev-scaled singular value of the mean-zero `𝒱` block.
    pub sigma_min_v: f64,
    /// Unscaled 2-norm condition number.
    pub cond_euclidean: f64,
    pub sigma_min_v_euclidean: f64,
    pub size: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditioningStudy {
    pub rows: Vec<ConditioningRow>,
    pub max_cond_ratio: f64,
    /// `max σ / min σ - 1` over the table.
    pub sigma_spread: f64,
}

/// `conditioning_study` operation. The exterior mesh of `problem` is kept fixed
/// while the boundary node count runs through `ns`.
pub fn conditioning_study(problem: &DirichletProblem, ns: &[usize]) -> Result<ConditioningStudy> {
    let mut rows = Vec::new();
    for &n in ns {
        let mut p = problem.clone();
        p.disc.n = n;
        let disc = Discretized::new(&p)?;
        let sys = assemble_system(&p, &disc)?;
        let (nd, nb) = (sys.n_dom, sys.n_bnd);
        let size = sys.size();
        let lam = sobolev_scaling(nb, 0.5);
        let hb = (2.0 * PI / nb as f64).sqrt();
        let sw: Vec<f64> = disc.unknowns.iter().map(|&i| disc.mesh.weights[i].sqrt()).collect();
        let mut left = Mat::<f64>::zeros(size, size);
        let mut right = Mat::<f64>::zeros(size, size);
        for i in 0..nd {
            left[(i, i)] = sw[i];
            right[(i, i)] = 1.0 / sw[i];
        }
        for i in 0..nb {
            for j in 0..nb {
                left[(nd + i, nd + j)] = hb * lam[(i, j)];
                right[(nd + i, nd + j)] = lam[(i, j)] / hb;
            }
        }
        left[(size - 1, size - 1)] = 1.0;
        right[(size - 1, size - 1)] = 1.0;
        let scaled = &left * &sys.matrix * &right;
        let s = singular_values(&scaled)?;
        let se = singular_values(&sys.matrix)?;
        let cond = |s: &[f64]| s[0] / s[s.len() - 1];
        let vs = mean_zero_single_layer_singular_values(&disc.ops, true)?;
        let ve = mean_zero_single_layer_singular_values(&disc.ops, false)?;
        rows.push(ConditioningRow {
            n,
            cond_m: cond(&s),
            sigma_min_v: *vs.last().unwrap(),
            cond_euclidean: cond(&se),
            sigma_min_v_euclidean: *ve.last().unwrap(),
            size,
        });
    }
    let max_cond_ratio = rows
        .windows(2)
        .map(|w| (w[1].cond_m / w[0].cond_m).max(w[0].cond_m / w[1].cond_m))
        .fold(1.0, f64::max);
    let smax = rows.iter().map(|r| r.sigma_min_v).fold(0.0, f64::max);
    let smin = rows.iter().map(|r| r.sigma_min_v).fold(f64::INFINITY, f64::min);
    Ok(ConditioningStudy { rows, max_cond_ratio, sigma_spread: smax / smin - 1.0 })
}

/// One refinement level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Level {
    pub n: usize,
    pub h: f64,
}

/// One row of a convergence table.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub h: f64,
    pub err_u: f64,
    pub err_psi: f64,
    pub order_u: Option<f64>,
    pub order_psi: Option<f64>,
    /// `min(order_u, order_psi)`.
    pub order: Option<f64>,
    pub psi_error_abs: f64,
    pub n_dom: usize,
    pub seconds: f64,
}

/// Solve `case` on each level and tabulate relative errors and observed orders.
pub fn convergence_study(
    case: &ManufacturedCase,
    curve: &CurveParametrization,
    base: &Discretization,
    levels: &[Level],
    solver: &SolverOptions,
    compatibility_tol: f64,
) -> Result<Vec<ConvergenceRow>> {
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for lv in levels {
        let start = std::time::Instant::now();
        let disc = Discretization { n: lv.n, h: lv.h, ..*base };
        let problem = case.problem(curve, disc, compatibility_tol);
        let d = Discretized::new(&problem)?;
        let sys = assemble_system(&problem, &d)?;
        let sol = solve(&sys, solver)?;
        let rep = equivalence_check(case, &problem, &d, &sol, &[])?;
        let order = |prev: f64, cur: f64, hp: f64| {
            if prev > 0.0 && cur > 0.0 {
                Some((prev / cur).ln() / (hp / lv.h).ln())
            } else {
                None
            }
        };
        let (order_u, order_psi) = match rows.last() {
            Some(p) => (order(p.err_u, rep.u_relative, p.h), order(p.err_psi, rep.psi_relative, p.h)),
            None => (None, None),
        };
        let order = match (order_u, order_psi) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        rows.push(ConvergenceRow {
            n: lv.n,
            h: lv.h,
            err_u: rep.u_relative,
            err_psi: rep.psi_relative,
            order_u,
            order_psi,
            order,
            psi_error_abs: rep.psi_error,
            n_dom: d.n_dom(),
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok(rows)
}

/// Writes the `N,h,err_u,err_psi,order` table.
pub fn write_convergence_csv(rows: &[ConvergenceRow], out: impl std::io::Write) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["N", "h", "err_u", "err_psi", "order"])?;
    for r in rows {
        let order = r.order.map(|o| format!("{o:.6}")).unwrap_or_default();
        w.write_record([r.n.to_string(), r.h.to_string(), format!("{:.6e}", r.err_u), format!("{:.6e}", r.err_psi), order])?;
    }
    w.flush()
}

/// Writes the `N,cond_M,sigma_min_V` table.
pub fn write_conditioning_csv(rows: &[ConditioningRow], out: impl std::io::Write) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["N", "cond_M", "sigma_min_V"])?;
    for r in rows {
        w.write_record([r.n.to_string(), format!("{:.6e}", r.cond_m), format!("{:.6e}", r.sigma_min_v)])?;
    }
    w.flush()
}

/// Green-identity residuals at three levels, refining `(N, h, R_trunc)` together.
pub fn green_refinement_study(
    case: &ManufacturedCase,
    curve: &CurveParametrization,
    base: &Discretization,
    levels: &[(Level, f64)],
) -> Result<Vec<GreenResiduals>> {
    let points = probe_points(curve);
    levels
        .iter()
        .map(|&(lv, r_trunc)| {
            let disc = Discretization { n: lv.n, h: lv.h, r_trunc, ..*base };
            let d = Discretized::new(&case.problem(curve, disc, 1.0))?;
            Ok(green_identity_residuals(case, &d, &points))
        })
        .collect()
}

/// Non-increasing sequence, treating values below `floor` as converged.
pub fn monotone_to_floor(values: &[f64], floor: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] || w[1] <= floor)
}

/// Mesh and quadrature used by coefficient-only studies.
pub fn study_quadrature(curve: &CurveParametrization, r_trunc: f64, h: f64) -> Result<VolumeQuadrature> {
    let mesh = DomainMesh::new(curve, &MeshOptions::new(r_trunc, h))?;
    Ok(VolumeQuadrature::new(&mesh, VolumeOptions::default()))
}

/// Boundary grid plus layer potentials on a curve, for kernel checks.
pub fn boundary_setup(curve: &CurveParametrization, n: usize, field: &CoefficientField) -> Result<(BoundaryOperators, LayerPotentials)> {
    let grid = BoundaryGrid::new(curve, n)?;
    Ok((BoundaryOperators::new(&grid, field)?, LayerPotentials::new(&grid)?))
}
