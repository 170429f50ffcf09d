//! Variable-coefficient potentials built from the harmonic ones.
//!
//! With `P(x, y) = P_Δ(x - y) / a(x)`:
//! `𝒫 rho = 𝒫_Δ(rho/a)`, `V rho = V_Δ(rho/a)`,
//! `W tau = W_Δ tau - V_Δ(tau ∂_n ln a)`, `𝒲' rho = a 𝒲'_Δ(rho/a)`,
//! `ℛ rho = div 𝒫_Δ(rho grad ln a) - 𝒫_Δ(rho Δ ln a)`.

use crate::coefficient::{quintic_cutoff, CoefficientField};
use crate::error::{BdieError, Result};
use crate::geometry::BoundaryGrid;
use crate::laplace::{
    adjoint_double_layer_matrix, double_layer_matrix, fundamental_solution, hypersingular_matrix, matvec,
    single_layer_matrix, LayerPotentials,
};
use crate::vec2::Vec2;
use crate::volume::{Target, VolumeQuadrature, Weighting};
use faer::Mat;

/// `P(x, y) = log|x - y| / (2 pi a(x))`.
pub fn parametrix_p(x: Vec2, y: Vec2, field: &CoefficientField) -> Result<f64> {
    Ok(fundamental_solution(x, y)? / field.eval(x)?.value)
}

/// Coefficient data sampled on the boundary grid.
#[derive(Debug, Clone)]
pub struct BoundaryCoefficient {
    pub a: Vec<f64>,
    /// `∂ ln a / ∂n` with the grid normals.
    pub dlog_dn: Vec<f64>,
}

impl BoundaryCoefficient {
    pub fn new(grid: &BoundaryGrid, field: &CoefficientField) -> Result<Self> {
        let mut a = Vec::with_capacity(grid.len());
        let mut d = Vec::with_capacity(grid.len());
        for (p, n) in grid.points.iter().zip(&grid.normals) {
            let s = field.eval(*p)?;
            a.push(s.value);
            d.push(s.gradient.dot(*n) / s.value);
        }
        Ok(Self { a, dlog_dn: d })
    }
}

/// Weighting that turns a volume row into a row of `ℛ`.
pub fn remainder_weighting<'a>(quad: &VolumeQuadrature, field: &'a CoefficientField) -> Weighting<'a> {
    Weighting::new(&quad.mesh, move |x| {
        let g = field.grad_log(x);
        [-field.laplacian_log(x), g.x, g.y]
    })
}

/// Weighting for `𝒫 = 𝒫_Δ(·/a)`.
pub fn parametrix_weighting<'a>(quad: &VolumeQuadrature, field: &'a CoefficientField) -> Weighting<'a> {
    Weighting::new(&quad.mesh, move |x| [1.0 / field.value(x), 0.0, 0.0])
}

/// `𝒫 rho(y)` for mesh data `rho`.
pub fn volume_p(quad: &VolumeQuadrature, rho: &[f64], field: &CoefficientField, target: Target) -> f64 {
    dot(&quad.row(target, &parametrix_weighting(quad, field)), rho)
}

/// `𝒫 f(y)` for a source known in closed form.
pub fn volume_p_source(
    quad: &VolumeQuadrature,
    f: impl Fn(Vec2) -> f64 + Sync,
    field: &CoefficientField,
    target: Target,
) -> f64 {
    let w = Weighting::new(&quad.mesh, |x| [f(x) / field.value(x), 0.0, 0.0]);
    quad.apply(target, &w)
}

/// Row of `ℛ` at the target over all mesh nodes.
pub fn remainder_row(quad: &VolumeQuadrature, weighting: &Weighting, field: &CoefficientField, target: Target) -> Vec<f64> {
    if field.is_constant() {
        return vec![0.0; quad.mesh.len()];
    }
    quad.row(target, weighting)
}

/// `ℛ rho(y)`.
pub fn remainder_r(quad: &VolumeQuadrature, rho: &[f64], field: &CoefficientField, target: Target) -> f64 {
    let w = remainder_weighting(quad, field);
    dot(&remainder_row(quad, &w, field, target), rho)
}

/// `γ⁺ ℛ rho` at the grid nodes.
pub fn trace_remainder(quad: &VolumeQuadrature, rho: &[f64], field: &CoefficientField, grid: &BoundaryGrid) -> Vec<f64> {
    let w = remainder_weighting(quad, field);
    grid.t.iter().map(|&t| dot(&remainder_row(quad, &w, field, Target::Boundary(t)), rho)).collect()
}

/// `V rho(y) = V_Δ(rho/a)(y)` for `y` off the boundary.
pub fn layer_v(lp: &LayerPotentials, rho: &[f64], bc: &BoundaryCoefficient, y: Vec2) -> f64 {
    let q: Vec<f64> = rho.iter().zip(&bc.a).map(|(r, a)| r / a).collect();
    lp.single_layer(y, &q)
}

/// `W tau(y) = W_Δ tau(y) - V_Δ(tau ∂_n ln a)(y)`.
pub fn layer_w(lp: &LayerPotentials, tau: &[f64], bc: &BoundaryCoefficient, y: Vec2) -> f64 {
    let corr: Vec<f64> = tau.iter().zip(&bc.dlog_dn).map(|(t, d)| t * d).collect();
    lp.double_layer(y, tau) - lp.single_layer(y, &corr)
}

/// Scales column `j` by `s[j]`.
fn scale_cols(m: &Mat<f64>, s: &[f64]) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s[j])
}

/// Boundary operators of the variable-coefficient problem on one grid.
#[derive(Debug, Clone)]
pub struct BoundaryOperators {
    pub grid: BoundaryGrid,
    pub coeff: BoundaryCoefficient,
    pub v_delta: Mat<f64>,
    pub w_delta: Mat<f64>,
    pub w_adj_delta: Mat<f64>,
    pub hyper_delta: Mat<f64>,
}

impl BoundaryOperators {
    pub fn new(grid: &BoundaryGrid, field: &CoefficientField) -> Result<Self> {
        Ok(Self {
            grid: grid.clone(),
            coeff: BoundaryCoefficient::new(grid, field)?,
            v_delta: single_layer_matrix(grid),
            w_delta: double_layer_matrix(grid),
            w_adj_delta: adjoint_double_layer_matrix(grid),
            hyper_delta: hypersingular_matrix(grid),
        })
    }

    /// `𝒱 = 𝒱_Δ diag(1/a)`.
    pub fn single_layer(&self) -> Mat<f64> {
        let inv: Vec<f64> = self.coeff.a.iter().map(|a| 1.0 / a).collect();
        scale_cols(&self.v_delta, &inv)
    }

    /// `𝒲 = 𝒲_Δ - 𝒱_Δ diag(∂_n ln a)`.
    pub fn double_layer(&self) -> Mat<f64> {
        &self.w_delta - scale_cols(&self.v_delta, &self.coeff.dlog_dn)
    }

    /// `𝒲' = diag(a) 𝒲'_Δ diag(1/a)`.
    pub fn adjoint_double_layer(&self) -> Mat<f64> {
        let a = &self.coeff.a;
        Mat::from_fn(a.len(), a.len(), |i, j| a[i] * self.w_adj_delta[(i, j)] / a[j])
    }

    /// `ℒ̂ = diag(a) H`.
    pub fn hypersingular(&self) -> Mat<f64> {
        let a = &self.coeff.a;
        Mat::from_fn(a.len(), a.len(), |i, j| a[i] * self.hyper_delta[(i, j)])
    }

    pub fn boundary_v(&self, rho: &[f64]) -> Vec<f64> {
        let q: Vec<f64> = rho.iter().zip(&self.coeff.a).map(|(r, a)| r / a).collect();
        matvec(&self.v_delta, &q)
    }

    pub fn boundary_w(&self, tau: &[f64]) -> Vec<f64> {
        let corr: Vec<f64> = tau.iter().zip(&self.coeff.dlog_dn).map(|(t, d)| t * d).collect();
        let w = matvec(&self.w_delta, tau);
        let v = matvec(&self.v_delta, &corr);
        w.iter().zip(&v).map(|(a, b)| a - b).collect()
    }

    /// `(𝒲' rho, ℒ̂ rho, ℒ⁺ rho, ℒ⁻ rho)` with
    /// `ℒ± rho = ℒ̂ rho - a (±sigma/2 + 𝒲'_Δ sigma)`, `sigma = rho ∂_n ln a`.
    pub fn conormal_ops(&self, rho: &[f64]) -> ConormalValues {
        let a = &self.coeff.a;
        let q: Vec<f64> = rho.iter().zip(a).map(|(r, a)| r / a).collect();
        let wq = matvec(&self.w_adj_delta, &q);
        let w_adj: Vec<f64> = wq.iter().zip(a).map(|(w, a)| a * w).collect();
        let h = matvec(&self.hyper_delta, rho);
        let l_hat: Vec<f64> = h.iter().zip(a).map(|(h, a)| a * h).collect();
        let sigma: Vec<f64> = rho.iter().zip(&self.coeff.dlog_dn).map(|(r, d)| r * d).collect();
        let ws = matvec(&self.w_adj_delta, &sigma);
        let n = rho.len();
        let mut l_plus = vec![0.0; n];
        let mut l_minus = vec![0.0; n];
        for i in 0..n {
            l_plus[i] = l_hat[i] - a[i] * (0.5 * sigma[i] + ws[i]);
            l_minus[i] = l_hat[i] - a[i] * (-0.5 * sigma[i] + ws[i]);
        }
        ConormalValues { w_adj, l_hat, l_plus, l_minus }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConormalValues {
    pub w_adj: Vec<f64>,
    pub l_hat: Vec<f64>,
    pub l_plus: Vec<f64>,
    pub l_minus: Vec<f64>,
}

/// `T⁺u = a n·grad u` at the grid nodes.
pub fn conormal_derivative(grad_u: impl Fn(Vec2) -> Vec2, grid: &BoundaryGrid, field: &CoefficientField) -> Vec<f64> {
    grid.points.iter().zip(&grid.normals).map(|(&p, &n)| field.value(p) * grad_u(p).dot(n)).collect()
}

/// `ℛ = ℛ_s + ℛ_c` with `ℛ_c rho = ℛ(chi rho)`, `ℛ_s rho = ℛ((1 - chi) rho)`.
#[derive(Debug, Clone)]
pub struct RemainderSplit {
    pub radius: f64,
    /// `chi` at the columns of the operator.
    pub chi: Vec<f64>,
}

impl RemainderSplit {
    /// Cutoff at the given column nodes. `r` must exceed the curve circumradius.
    pub fn new(quad: &VolumeQuadrature, r: f64, columns: &[usize]) -> Result<Self> {
        let rc = quad.mesh.curve.circumradius();
        if !(r > rc) {
            return Err(BdieError::Geometry(format!("split radius {r} must exceed the curve circumradius {rc:.6}")));
        }
        Ok(Self { radius: r, chi: columns.iter().map(|&i| quintic_cutoff(quad.mesh.nodes[i], r)).collect() })
    }

    /// `(ℛ_s, ℛ_c)` from an assembled `ℛ` whose columns match `chi`.
    pub fn split(&self, r: &Mat<f64>) -> (Mat<f64>, Mat<f64>) {
        let smooth = Mat::from_fn(r.nrows(), r.ncols(), |i, j| r[(i, j)] * (1.0 - self.chi[j]));
        let compact = Mat::from_fn(r.nrows(), r.ncols(), |i, j| r[(i, j)] * self.chi[j]);
        (smooth, compact)
    }
}

/// `remainder_split` operation.
pub fn remainder_split(
    quad: &VolumeQuadrature,
    r_matrix: &Mat<f64>,
    columns: &[usize],
    r: f64,
) -> Result<(Mat<f64>, Mat<f64>)> {
    Ok(RemainderSplit::new(quad, r, columns)?.split(r_matrix))
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
