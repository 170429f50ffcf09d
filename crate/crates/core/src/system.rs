//! Assembly and solution of the segregated system
//!
//! ```text
//! u + ℛu - Vψ = F₀                 at the domain unknown nodes
//! γ⁺ℛu - 𝒱ψ + λ = γ⁺F₀ - φ₀         at the boundary nodes
//! Σ w_j ψ_j = 0
//! ```
//!
//! with `F₀ = 𝒫f - Wφ₀`. The multiplier `λ` equals the Dirichlet defect
//! `γ⁺u - φ₀` of the reconstructed field.

use crate::coefficient::CoefficientField;
use crate::error::{BdieError, Result};
use crate::geometry::{BoundaryGrid, CurveParametrization, DomainMesh, MeshOptions};
use crate::laplace::{dot, matvec, LayerPotentials};
use crate::parametrix::{parametrix_weighting, remainder_row, remainder_weighting, BoundaryOperators};
use crate::vec2::Vec2;
use crate::volume::{Target, VolumeOptions, VolumeQuadrature, Weighting};
use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub type ScalarFn = Arc<dyn Fn(Vec2) -> f64 + Send + Sync>;

/// Discretization parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    /// Boundary nodes.
    pub n: usize,
    pub r_trunc: f64,
    /// Target spacing of the exterior mesh.
    pub h: f64,
    pub radial_order: usize,
    /// Extra radius added to the coefficient support when selecting domain unknowns.
    pub support_margin: f64,
    pub volume: VolumeOptions,
}

impl Discretization {
    pub fn new(n: usize, r_trunc: f64, h: f64) -> Self {
        Self { n, r_trunc, h, radial_order: 8, support_margin: 0.5, volume: VolumeOptions::default() }
    }
}

/// Exterior Dirichlet problem `div(a grad u) = f`, `γ⁺u = φ₀`.
#[derive(Clone)]
pub struct DirichletProblem {
    pub curve: CurveParametrization,
    pub field: CoefficientField,
    pub source: ScalarFn,
    pub dirichlet: ScalarFn,
    pub disc: Discretization,
    /// Admissible `|⟨f,1⟩| / max(1, ⟨|f|,1⟩)`.
    pub compatibility_tol: f64,
}

impl std::fmt::Debug for DirichletProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirichletProblem")
            .field("curve", &self.curve)
            .field("field", &self.field)
            .field("disc", &self.disc)
            .finish_non_exhaustive()
    }
}

/// Grids, quadratures and operators shared by assembly and post-processing.
#[derive(Debug, Clone)]
pub struct Discretized {
    pub grid: BoundaryGrid,
    pub mesh: DomainMesh,
    pub quad: VolumeQuadrature,
    pub layers: LayerPotentials,
    pub ops: BoundaryOperators,
    /// Mesh indices of the domain unknowns.
    pub unknowns: Vec<usize>,
    pub unknown_radius: f64,
}

impl Discretized {
    pub fn new(problem: &DirichletProblem) -> Result<Self> {
        let d = &problem.disc;
        let grid = BoundaryGrid::new(&problem.curve, d.n)?;
        let opts = MeshOptions { radial_order: d.radial_order, ..MeshOptions::new(d.r_trunc, d.h) };
        let base = problem.field.support_radius.max(problem.curve.circumradius());
        let unknown_radius = base + d.support_margin;
        let mesh = DomainMesh::new(&problem.curve, &opts)?.with_support_radius(unknown_radius);
        let unknowns: Vec<usize> = (0..mesh.len()).filter(|&i| mesh.in_support[i]).collect();
        if unknowns.is_empty() {
            return Err(BdieError::Assembly("no mesh node lies in the unknown region".into()));
        }
        let quad = VolumeQuadrature::new(&mesh, d.volume);
        let layers = LayerPotentials::new(&grid)?;
        let ops = BoundaryOperators::new(&grid, &problem.field)?;
        Ok(Self { grid, mesh, quad, layers, ops, unknowns, unknown_radius })
    }

    pub fn n_dom(&self) -> usize {
        self.unknowns.len()
    }

    pub fn n_bnd(&self) -> usize {
        self.grid.len()
    }
}

/// Right-hand side data.
#[derive(Debug, Clone)]
pub struct F0Data {
    /// `F₀` at the domain unknowns.
    pub domain: Vec<f64>,
    /// `γ⁺F₀` at the boundary nodes.
    pub boundary: Vec<f64>,
    /// `φ₀` at the boundary nodes.
    pub phi0: Vec<f64>,
}

/// Discrete `⟨f, 1⟩_Ω` and the compatibility verdict.
pub fn compatibility(problem: &DirichletProblem, mesh: &DomainMesh) -> Result<f64> {
    let f = mesh.sample(|x| (problem.source)(x));
    let mean = mesh.integrate(&f);
    let scale = f.iter().zip(&mesh.weights).map(|(v, w)| v.abs() * w).sum::<f64>().max(1.0);
    if mean.abs() > problem.compatibility_tol * scale {
        return Err(BdieError::Compatibility { mean, tol: problem.compatibility_tol * scale });
    }
    Ok(mean)
}

fn source_weighting<'a>(problem: &'a DirichletProblem, disc: &Discretized) -> Weighting<'a> {
    let field = &problem.field;
    let src = &problem.source;
    Weighting::new(&disc.mesh, move |x| [src(x) / field.value(x), 0.0, 0.0])
}

fn f0_point(disc: &Discretized, w_src: &Weighting, phi0: &[f64], corr: &[f64], target: Target, y: Vec2) -> f64 {
    let pf = disc.quad.apply(target, w_src);
    let w = disc.layers.double_layer(y, phi0) - disc.layers.single_layer(y, corr);
    pf - w
}

fn boundary_data(problem: &DirichletProblem, disc: &Discretized) -> (Vec<f64>, Vec<f64>) {
    let phi0 = disc.grid.sample(|x| (problem.dirichlet)(x));
    let corr = phi0.iter().zip(&disc.ops.coeff.dlog_dn).map(|(p, d)| p * d).collect();
    (phi0, corr)
}

/// `F₀ = 𝒫f - Wφ₀` at an exterior point.
pub fn f0_at(problem: &DirichletProblem, disc: &Discretized, y: Vec2) -> f64 {
    let (phi0, corr) = boundary_data(problem, disc);
    f0_point(disc, &source_weighting(problem, disc), &phi0, &corr, Target::Point(y), y)
}

/// `assemble_F0` operation.
pub fn assemble_f0(problem: &DirichletProblem, disc: &Discretized) -> F0Data {
    let (phi0, corr) = boundary_data(problem, disc);
    let w_src = source_weighting(problem, disc);
    let domain = disc
        .unknowns
        .par_iter()
        .map(|&i| f0_point(disc, &w_src, &phi0, &corr, Target::Node(i), disc.mesh.nodes[i]))
        .collect();
    let pf: Vec<f64> = disc.grid.t.par_iter().map(|&t| disc.quad.apply(Target::Boundary(t), &w_src)).collect();
    let gw = disc.ops.boundary_w(&phi0);
    let boundary = (0..disc.n_bnd()).map(|k| pf[k] - (-0.5 * phi0[k] + gw[k])).collect();
    F0Data { domain, boundary, phi0 }
}

/// The assembled system and its blocks.
#[derive(Debug, Clone)]
pub struct BdieSystem {
    pub matrix: Mat<f64>,
    pub rhs: Vec<f64>,
    pub n_dom: usize,
    pub n_bnd: usize,
    /// `ℛ` restricted to the unknowns.
    pub r_dom: Mat<f64>,
    /// `γ⁺ℛ` on the unknowns.
    pub r_bnd: Mat<f64>,
    /// `V(·)` rows at the unknowns, acting on `ψ`.
    pub v_dom: Mat<f64>,
    /// `𝒱` acting on `ψ`.
    pub v_bnd: Mat<f64>,
    pub weights: Vec<f64>,
    pub f0: F0Data,
}

impl BdieSystem {
    pub fn size(&self) -> usize {
        self.n_dom + self.n_bnd + 1
    }

    /// Largest entry of the two remainder blocks.
    pub fn remainder_max(&self) -> (f64, f64) {
        (max_abs(&self.r_dom), max_abs(&self.r_bnd))
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        let n = self.size();
        let scale = max_abs(&self.matrix);
        (0..n).all(|i| (0..i).all(|j| (self.matrix[(i, j)] - self.matrix[(j, i)]).abs() <= tol * scale))
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        matvec(&self.matrix, x)
    }
}

fn max_abs(m: &Mat<f64>) -> f64 {
    let mut v: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            v = v.max(m[(i, j)].abs());
        }
    }
    v
}

/// Rows of `ℛ` at the given targets restricted to the unknown columns.
pub fn remainder_block(problem: &DirichletProblem, disc: &Discretized, targets: &[Target]) -> Mat<f64> {
    let n_dom = disc.n_dom();
    if problem.field.is_constant() {
        return Mat::zeros(targets.len(), n_dom);
    }
    let weighting = remainder_weighting(&disc.quad, &problem.field);
    let rows: Vec<Vec<f64>> = targets
        .par_iter()
        .map(|&t| {
            let full = remainder_row(&disc.quad, &weighting, &problem.field, t);
            disc.unknowns.iter().map(|&j| full[j]).collect()
        })
        .collect();
    Mat::from_fn(targets.len(), n_dom, |i, j| rows[i][j])
}

/// `assemble_system` operation.
pub fn assemble_system(problem: &DirichletProblem, disc: &Discretized) -> Result<BdieSystem> {
    if disc.grid.len() != problem.disc.n {
        return Err(BdieError::Assembly("discretization does not match the problem".into()));
    }
    compatibility(problem, &disc.mesh)?;
    let n_dom = disc.n_dom();
    let n_bnd = disc.n_bnd();
    let dom_targets: Vec<Target> = disc.unknowns.iter().map(|&i| Target::Node(i)).collect();
    let bnd_targets: Vec<Target> = disc.grid.t.iter().map(|&t| Target::Boundary(t)).collect();
    let r_dom = remainder_block(problem, disc, &dom_targets);
    let r_bnd = remainder_block(problem, disc, &bnd_targets);
    let inv_a: Vec<f64> = disc.ops.coeff.a.iter().map(|a| 1.0 / a).collect();
    let v_rows: Vec<Vec<f64>> = disc
        .unknowns
        .par_iter()
        .map(|&i| disc.layers.single_layer_row(disc.mesh.nodes[i]).0)
        .collect();
    let v_dom = Mat::from_fn(n_dom, n_bnd, |i, k| v_rows[i][k] * inv_a[k]);
    let v_bnd = disc.ops.single_layer();
    let f0 = assemble_f0(problem, disc);

    let size = n_dom + n_bnd + 1;
    let mut m = Mat::<f64>::zeros(size, size);
    for j in 0..n_dom {
        for i in 0..n_dom {
            m[(i, j)] = r_dom[(i, j)];
        }
        m[(j, j)] += 1.0;
        for k in 0..n_bnd {
            m[(n_dom + k, j)] = r_bnd[(k, j)];
        }
    }
    for l in 0..n_bnd {
        for i in 0..n_dom {
            m[(i, n_dom + l)] = -v_dom[(i, l)];
        }
        for k in 0..n_bnd {
            m[(n_dom + k, n_dom + l)] = -v_bnd[(k, l)];
        }
        m[(n_dom + l, size - 1)] = 1.0;
        m[(size - 1, n_dom + l)] = disc.grid.weights[l];
    }
    let mut rhs = Vec::with_capacity(size);
    rhs.extend_from_slice(&f0.domain);
    rhs.extend((0..n_bnd).map(|k| f0.boundary[k] - f0.phi0[k]));
    rhs.push(0.0);
    Ok(BdieSystem { matrix: m, rhs, n_dom, n_bnd, r_dom, r_bnd, v_dom, v_bnd, weights: disc.grid.weights.clone(), f0 })
}

/// Linear solver choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Direct,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub method: SolveMethod,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub restart: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { method: SolveMethod::Direct, tolerance: 1e-12, max_iterations: 500, restart: 60 }
    }
}

/// Solution with diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct BdieSolution {
    pub u: Vec<f64>,
    pub psi: Vec<f64>,
    pub lambda: f64,
    /// `‖𝓜x - b‖ / ‖b‖` (0 when `b = 0` and `x = 0`).
    pub relative_residual: f64,
    /// 1-norm condition estimate (direct solves only).
    pub condition_estimate: Option<f64>,
    pub iterations: usize,
    pub method: SolveMethod,
    /// `|Σ w ψ| / ‖ψ‖`.
    pub mean_psi: f64,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn lu_solve(lu: &PartialPivLu<f64>, b: &[f64]) -> Vec<f64> {
    let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
    let x = lu.solve(&rhs);
    (0..b.len()).map(|i| x[(i, 0)]).collect()
}

fn lu_solve_transpose(lu: &PartialPivLu<f64>, b: &[f64]) -> Vec<f64> {
    let rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
    let x = lu.solve_transpose(&rhs);
    (0..b.len()).map(|i| x[(i, 0)]).collect()
}

fn check_pivots(lu: &PartialPivLu<f64>) -> Result<()> {
    let u = lu.U();
    let n = u.nrows();
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for i in 0..n {
        let v = u[(i, i)].abs();
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !(lo > 1e-14 * hi) || !lo.is_finite() {
        return Err(BdieError::Singular(format!(
            "LU pivot ratio {:.3e} below 1e-14; the discrete operator is numerically singular",
            lo / hi
        )));
    }
    Ok(())
}

/// Hager–Higham estimate of `‖A⁻¹‖₁`.
fn inverse_norm1_estimate(lu: &PartialPivLu<f64>, n: usize) -> f64 {
    let mut x = vec![1.0 / n as f64; n];
    let mut est = 0.0;
    for _ in 0..5 {
        let y = lu_solve(lu, &x);
        let new_est: f64 = y.iter().map(|v| v.abs()).sum();
        let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
        let z = lu_solve_transpose(lu, &xi);
        let (jmax, zmax) = z.iter().enumerate().fold((0, 0.0), |(bj, bv), (j, v)| if v.abs() > bv { (j, v.abs()) } else { (bj, bv) });
        let zx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
        if new_est <= est || zmax <= zx {
            est = est.max(new_est);
            break;
        }
        est = new_est;
        x = vec![0.0; n];
        x[jmax] = 1.0;
    }
    est
}

fn norm1(m: &Mat<f64>) -> f64 {
    (0..m.ncols()).map(|j| (0..m.nrows()).map(|i| m[(i, j)].abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Block preconditioner: the system with both remainder blocks dropped.
struct ConstantCoefficientPreconditioner<'a> {
    sys: &'a BdieSystem,
    lu: PartialPivLu<f64>,
}

impl<'a> ConstantCoefficientPreconditioner<'a> {
    fn new(sys: &'a BdieSystem) -> Result<Self> {
        let n = sys.n_bnd;
        let b = Mat::from_fn(n + 1, n + 1, |i, j| match (i < n, j < n) {
            (true, true) => -sys.v_bnd[(i, j)],
            (true, false) => 1.0,
            (false, true) => sys.weights[j],
            (false, false) => 0.0,
        });
        let lu = b.partial_piv_lu();
        check_pivots(&lu)?;
        Ok(Self { sys, lu })
    }

    fn apply(&self, r: &[f64]) -> Vec<f64> {
        let (nd, nb) = (self.sys.n_dom, self.sys.n_bnd);
        let zb = lu_solve(&self.lu, &r[nd..]);
        let vz = matvec(&self.sys.v_dom, &zb[..nb]);
        let mut z = Vec::with_capacity(nd + nb + 1);
        z.extend((0..nd).map(|i| r[i] + vz[i]));
        z.extend_from_slice(&zb);
        z
    }
}

/// Restarted GMRES with right preconditioning. Returns `(x, iterations, relative residual)`.
fn gmres(sys: &BdieSystem, opts: &SolverOptions) -> Result<(Vec<f64>, usize, f64)> {
    let prec = ConstantCoefficientPreconditioner::new(sys)?;
    let n = sys.size();
    let b = &sys.rhs;
    let bnorm = norm2(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let m = opts.restart.max(1);
    let mut total = 0;
    loop {
        let ax = sys.apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm2(&r);
        if beta / bnorm <= opts.tolerance {
            return Ok((x, total, beta / bnorm));
        }
        if total >= opts.max_iterations {
            return Err(BdieError::NoConvergence(format!(
                "GMRES stopped after {total} iterations at relative residual {:.3e}",
                beta / bnorm
            )));
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut hmat = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..m {
            let z = prec.apply(&v[k]);
            let mut w = sys.apply(&z);
            for (i, vi) in v.iter().enumerate() {
                let hik = dot(&w, vi);
                hmat[i][k] = hik;
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= hik * vj;
                }
            }
            let hn = norm2(&w);
            hmat[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * hmat[i][k] + sn[i] * hmat[i + 1][k];
                hmat[i + 1][k] = -sn[i] * hmat[i][k] + cs[i] * hmat[i + 1][k];
                hmat[i][k] = t;
            }
            let d = (hmat[k][k] * hmat[k][k] + hmat[k + 1][k] * hmat[k + 1][k]).sqrt();
            cs[k] = hmat[k][k] / d;
            sn[k] = hmat[k + 1][k] / d;
            hmat[k][k] = d;
            hmat[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            total += 1;
            k_used = k + 1;
            if g[k + 1].abs() / bnorm <= opts.tolerance || hn == 0.0 || total >= opts.max_iterations {
                break;
            }
            v.push(w.iter().map(|wi| wi / hn).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= hmat[i][j] * y[j];
            }
            y[i] = s / hmat[i][i];
        }
        let mut update = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for (u, vj) in update.iter_mut().zip(&v[j]) {
                *u += yj * vj;
            }
        }
        let z = prec.apply(&update);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }
    }
}

/// `solve` operation.
pub fn solve(sys: &BdieSystem, opts: &SolverOptions) -> Result<BdieSolution> {
    let n = sys.size();
    let (x, iterations, cond) = match opts.method {
        SolveMethod::Direct => {
            let lu = sys.matrix.partial_piv_lu();
            check_pivots(&lu)?;
            let x = lu_solve(&lu, &sys.rhs);
            let cond = norm1(&sys.matrix) * inverse_norm1_estimate(&lu, n);
            (x, 0, Some(cond))
        }
        SolveMethod::Iterative => {
            let (x, it, _) = gmres(sys, opts)?;
            (x, it, None)
        }
    };
    if x.iter().any(|v| !v.is_finite()) {
        return Err(BdieError::Singular("solution contains non-finite values".into()));
    }
    let ax = sys.apply(&x);
    let res: Vec<f64> = ax.iter().zip(&sys.rhs).map(|(a, b)| a - b).collect();
    let bnorm = norm2(&sys.rhs);
    let relative_residual = if bnorm > 0.0 { norm2(&res) / bnorm } else { norm2(&res) };
    let u = x[..sys.n_dom].to_vec();
    let psi = x[sys.n_dom..sys.n_dom + sys.n_bnd].to_vec();
    let psi_norm = norm2(&psi);
    let mean = dot(&psi, &sys.weights);
    Ok(BdieSolution {
        u,
        psi,
        lambda: x[n - 1],
        relative_residual,
        condition_estimate: cond,
        iterations,
        method: opts.method,
        mean_psi: if psi_norm > 0.0 { mean.abs() / psi_norm } else { mean.abs() },
    })
}

/// `u(y) = F₀(y) - ℛu(y) + Vψ(y)` for `y` in the exterior.
pub fn evaluate_u_field(sol: &BdieSolution, problem: &DirichletProblem, disc: &Discretized, y: Vec2) -> Result<f64> {
    if problem.curve.winding_number(y).abs() > 0.5 {
        return Err(BdieError::OutsideDomain { x: y.x, y: y.y });
    }
    if disc.grid.node_distance(y) == 0.0 {
        return Err(BdieError::OutsideDomain { x: y.x, y: y.y });
    }
    let f0 = f0_at(problem, disc, y);
    let ru = if problem.field.is_constant() {
        0.0
    } else {
        let w = remainder_weighting(&disc.quad, &problem.field);
        let row = remainder_row(&disc.quad, &w, &problem.field, Target::Point(y));
        disc.unknowns.iter().zip(&sol.u).map(|(&j, u)| row[j] * u).sum()
    };
    let q: Vec<f64> = sol.psi.iter().zip(&disc.ops.coeff.a).map(|(p, a)| p / a).collect();
    Ok(f0 - ru + disc.layers.single_layer(y, &q))
}

/// Nodal `𝒫 rho` for mesh data, used by the verification studies.
pub fn volume_parametrix_row(disc: &Discretized, field: &CoefficientField, target: Target) -> Vec<f64> {
    disc.quad.row(target, &parametrix_weighting(&disc.quad, field))
}

/// Summary numbers of a solve.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub n_dom: usize,
    pub n_bnd: usize,
    pub unknown_radius: f64,
    pub relative_residual: f64,
    pub condition_estimate: Option<f64>,
    pub iterations: usize,
    pub dirichlet_defect: f64,
    pub mean_psi: f64,
    pub remainder_block_max: f64,
    pub trace_remainder_block_max: f64,
}

pub fn diagnostics(sys: &BdieSystem, disc: &Discretized, sol: &BdieSolution) -> Diagnostics {
    let (rd, rb) = sys.remainder_max();
    Diagnostics {
        n_dom: sys.n_dom,
        n_bnd: sys.n_bnd,
        unknown_radius: disc.unknown_radius,
        relative_residual: sol.relative_residual,
        condition_estimate: sol.condition_estimate,
        iterations: sol.iterations,
        dirichlet_defect: sol.lambda,
        mean_psi: sol.mean_psi,
        remainder_block_max: rd,
        trace_remainder_block_max: rb,
    }
}

/// Writes `x,y,u` rows for the domain unknowns and `x,y,psi` rows for the boundary.
pub fn write_solution_csv(
    disc: &Discretized,
    sol: &BdieSolution,
    domain: impl std::io::Write,
    boundary: impl std::io::Write,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(domain);
    w.write_record(["x", "y", "u"])?;
    for (&i, u) in disc.unknowns.iter().zip(&sol.u) {
        let p = disc.mesh.nodes[i];
        w.write_record([p.x.to_string(), p.y.to_string(), u.to_string()])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_writer(boundary);
    w.write_record(["x", "y", "psi"])?;
    for (p, psi) in disc.grid.points.iter().zip(&sol.psi) {
        w.write_record([p.x.to_string(), p.y.to_string(), psi.to_string()])?;
    }
    w.flush()
}
