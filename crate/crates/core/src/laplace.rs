//! Harmonic kernels and layer potentials with `P(x - y) = log|x - y| / (2 pi)`.
//!
//! Conventions: `V rho(y) = -∫ P(x - y) rho(x) dS_x`,
//! `W tau(y) = -∫ d_n(x) P(x - y) tau(x) dS_x`, with `n` the normal pointing
//! into the bounded component. On the boundary the double layer has the
//! jump `W± = ∓tau/2 + 𝒲` (plus side is the exterior domain) and
//! `T± V sigma = ±sigma/2 + 𝒲' sigma`.

use crate::error::{BdieError, Result};
use crate::geometry::{distance_to_curve, BoundaryGrid, CurveParametrization};
use crate::quadrature::trig_cardinal;
use crate::vec2::Vec2;
use faer::Mat;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::sync::Arc;

const INV_2PI: f64 = 0.5 / PI;

/// Targets closer than this many boundary spacings are evaluated on a
/// refined grid.
pub const NEAR_FACTOR: f64 = 5.0;
/// Refinement stops once the fine grid would exceed this many nodes.
pub const MAX_FINE_NODES: usize = 1 << 15;

/// `log|x - y| / (2 pi)`.
pub fn fundamental_solution(x: Vec2, y: Vec2) -> Result<f64> {
    let r2 = (x - y).norm_sq();
    if r2 == 0.0 {
        return Err(BdieError::SingularEvaluation { x: x.x, y: x.y });
    }
    Ok(0.25 * INV_2PI * 2.0 * r2.ln())
}

#[inline]
pub(crate) fn log_kernel(x: Vec2, y: Vec2) -> f64 {
    0.5 * INV_2PI * (x - y).norm_sq().ln()
}

/// Kress weights `R_j(t_i)`, a function of `i - j` only.
fn kress_weights(n: usize) -> Vec<f64> {
    let half = n / 2;
    let nf = n as f64;
    (0..n)
        .map(|d| {
            let t = 2.0 * PI * d as f64 / nf;
            let mut s = 0.0;
            for m in 1..half {
                s += (m as f64 * t).cos() / m as f64;
            }
            -4.0 * PI / nf * s - 4.0 * PI / (nf * nf) * (half as f64 * t).cos()
        })
        .collect()
}

/// Boundary single layer `𝒱` on the grid, `(𝒱 rho)_i = Σ_j V_ij rho_j`.
pub fn single_layer_matrix(grid: &BoundaryGrid) -> Mat<f64> {
    let n = grid.len();
    let r = kress_weights(n);
    let h = 2.0 * PI / n as f64;
    Mat::from_fn(n, n, |i, j| {
        let smooth = if i == j {
            grid.speeds[i].ln()
        } else {
            let d = grid.t[i] - grid.t[j];
            0.5 * ((grid.points[i] - grid.points[j]).norm_sq() / (4.0 * (0.5 * d).sin().powi(2))).ln()
        };
        let rij = r[(i + n - j) % n];
        -INV_2PI * (0.5 * rij + h * smooth) * grid.speeds[j]
    })
}

/// Limit of `(x_j - x_i)·n / |x_j - x_i|²` as `j -> i`, with the normal at `i`.
#[inline]
fn double_layer_diagonal(grid: &BoundaryGrid, i: usize) -> f64 {
    grid.second_derivatives[i].dot(grid.normals[i]) / (2.0 * grid.speeds[i] * grid.speeds[i])
}

/// Boundary double layer `𝒲`.
pub fn double_layer_matrix(grid: &BoundaryGrid) -> Mat<f64> {
    let n = grid.len();
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            INV_2PI * double_layer_diagonal(grid, i) * grid.weights[i]
        } else {
            let d = grid.points[j] - grid.points[i];
            -INV_2PI * d.dot(grid.normals[j]) / d.norm_sq() * grid.weights[j]
        }
    })
}

/// Adjoint double layer `𝒲'`, the direct value of `T V` on the boundary.
pub fn adjoint_double_layer_matrix(grid: &BoundaryGrid) -> Mat<f64> {
    let n = grid.len();
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            INV_2PI * double_layer_diagonal(grid, i) * grid.weights[i]
        } else {
            let d = grid.points[j] - grid.points[i];
            INV_2PI * d.dot(grid.normals[i]) / d.norm_sq() * grid.weights[j]
        }
    })
}

/// Spectral derivative in the parameter `t` on `n` equispaced periodic nodes.
pub fn periodic_derivative_matrix(n: usize) -> Mat<f64> {
    let h = 2.0 * PI / n as f64;
    Mat::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let k = i as isize - j as isize;
            let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            0.5 * sign / (0.5 * k as f64 * h).tan()
        }
    })
}

/// Hypersingular operator `H tau = -d/ds 𝒱 (d tau / ds)`, symbol `+n/2` on the unit circle.
pub fn hypersingular_matrix(grid: &BoundaryGrid) -> Mat<f64> {
    let n = grid.len();
    let d = periodic_derivative_matrix(n);
    let ds = Mat::from_fn(n, n, |i, j| d[(i, j)] / grid.speeds[i]);
    let v = single_layer_matrix(grid);
    -(&ds * &v * &ds)
}

/// Refined copy of the boundary grid used for near-boundary targets.
#[derive(Debug, Clone)]
struct FineGrid {
    points: Vec<Vec2>,
    normals: Vec<Vec2>,
    weights: Vec<f64>,
    /// `trig_cardinal(N, l h_fine)` for every fine offset `l`.
    cardinal: Vec<f64>,
}

/// Evaluates harmonic layer potentials at points away from the boundary.
///
/// Densities are sampled on the coarse grid; a target within
/// `NEAR_FACTOR * h` of the curve is integrated against the trigonometric
/// interpolant of the density on a grid fine enough that the node spacing is
/// at most a fifth of the target distance.
#[derive(Clone)]
pub struct LayerPotentials {
    pub grid: BoundaryGrid,
    spacing: f64,
    fine: Vec<FineGrid>,
    fft: Vec<Arc<dyn rustfft::Fft<f64>>>,
    ifft: Vec<Arc<dyn rustfft::Fft<f64>>>,
}

impl std::fmt::Debug for LayerPotentials {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LayerPotentials").field("n", &self.grid.len()).field("spacing", &self.spacing).finish()
    }
}

/// Whether a potential row was computed with the finest grid available while
/// the target still wanted more refinement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefinementCapped(pub bool);

impl LayerPotentials {
    pub fn new(grid: &BoundaryGrid) -> Result<Self> {
        let n = grid.len();
        let spacing = grid
            .points
            .iter()
            .enumerate()
            .map(|(j, p)| (grid.points[(j + 1) % n] - *p).norm())
            .fold(0.0, f64::max);
        let mut fine = Vec::new();
        let mut fft = Vec::new();
        let mut ifft = Vec::new();
        let mut planner = FftPlanner::new();
        let mut level = 0;
        while (n << (level + 1)) <= MAX_FINE_NODES.max(2 * n) {
            level += 1;
            let m = n << level;
            let g = BoundaryGrid::new(&grid.curve, m)?;
            let hf = 2.0 * PI / m as f64;
            let cardinal = (0..m).map(|l| trig_cardinal(n, l as f64 * hf)).collect();
            fine.push(FineGrid { points: g.points, normals: g.normals, weights: g.weights, cardinal });
            fft.push(planner.plan_fft_forward(m));
            ifft.push(planner.plan_fft_inverse(m));
        }
        Ok(Self { grid: grid.clone(), spacing, fine, fft, ifft })
    }

    pub fn curve(&self) -> &CurveParametrization {
        &self.grid.curve
    }

    /// Largest distance between neighbouring boundary nodes.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    fn level_for(&self, y: Vec2) -> (usize, bool) {
        if self.grid.node_distance(y) >= NEAR_FACTOR * self.spacing {
            return (0, false);
        }
        let d = distance_to_curve(&self.grid.curve, y);
        let mut level = 0;
        let mut h = self.spacing;
        while h > d / NEAR_FACTOR && level < self.fine.len() {
            level += 1;
            h *= 0.5;
        }
        (level, h > d / NEAR_FACTOR)
    }

    /// Maps fine-grid kernel weights `k_m` to coarse weights
    /// `r_j = Σ_m k_m c((m - j L) mod M)` by circular correlation.
    fn restrict(&self, level: usize, k: &[f64]) -> Vec<f64> {
        let fg = &self.fine[level - 1];
        let m = k.len();
        let n = self.grid.len();
        let stride = m / n;
        let mut a: Vec<Complex<f64>> = k.iter().map(|&v| Complex::new(v, 0.0)).collect();
        let mut b: Vec<Complex<f64>> = fg.cardinal.iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.fft[level - 1].process(&mut a);
        self.fft[level - 1].process(&mut b);
        // s_p = Σ_m k_m c_(m - p) has transform A conj(B) for real c.
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= y.conj();
        }
        self.ifft[level - 1].process(&mut a);
        let scale = 1.0 / m as f64;
        (0..n).map(|j| a[j * stride].re * scale).collect()
    }

    fn row_with(&self, y: Vec2, kernel: impl Fn(Vec2, Vec2, f64) -> f64) -> (Vec<f64>, RefinementCapped) {
        let (level, capped) = self.level_for(y);
        if level == 0 {
            let g = &self.grid;
            let row = (0..g.len()).map(|j| kernel(g.points[j], g.normals[j], g.weights[j])).collect();
            return (row, RefinementCapped(false));
        }
        let fg = &self.fine[level - 1];
        let k: Vec<f64> = (0..fg.points.len()).map(|m| kernel(fg.points[m], fg.normals[m], fg.weights[m])).collect();
        (self.restrict(level, &k), RefinementCapped(capped))
    }

    /// Row `r` with `V rho(y) = Σ_j r_j rho_j`.
    pub fn single_layer_row(&self, y: Vec2) -> (Vec<f64>, RefinementCapped) {
        self.row_with(y, |x, _, w| -log_kernel(x, y) * w)
    }

    /// Row `r` with `W tau(y) = Σ_j r_j tau_j`.
    pub fn double_layer_row(&self, y: Vec2) -> (Vec<f64>, RefinementCapped) {
        self.row_with(y, |x, n, w| {
            let d = x - y;
            -INV_2PI * d.dot(n) / d.norm_sq() * w
        })
    }

    /// Rows for both components of `grad_y V rho(y)`.
    pub fn single_layer_gradient_rows(&self, y: Vec2) -> ([Vec<f64>; 2], RefinementCapped) {
        let (gx, c) = self.row_with(y, |x, _, w| {
            let d = x - y;
            INV_2PI * d.x / d.norm_sq() * w
        });
        let (gy, _) = self.row_with(y, |x, _, w| {
            let d = x - y;
            INV_2PI * d.y / d.norm_sq() * w
        });
        ([gx, gy], c)
    }

    pub fn single_layer(&self, y: Vec2, rho: &[f64]) -> f64 {
        dot(&self.single_layer_row(y).0, rho)
    }

    pub fn double_layer(&self, y: Vec2, tau: &[f64]) -> f64 {
        dot(&self.double_layer_row(y).0, tau)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Matrix-vector product for a dense faer matrix and a slice.
pub fn matvec(m: &Mat<f64>, x: &[f64]) -> Vec<f64> {
    debug_assert_eq!(m.ncols(), x.len());
    let mut out = vec![0.0; m.nrows()];
    for j in 0..m.ncols() {
        let xj = x[j];
        if xj == 0.0 {
            continue;
        }
        let col = m.col(j);
        for (i, o) in out.iter_mut().enumerate() {
            *o += col[i] * xj;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CurveParametrization;

    fn circle_grid(n: usize) -> BoundaryGrid {
        BoundaryGrid::new(&CurveParametrization::unit_circle(), n).unwrap()
    }

    fn max_abs(a: &[f64]) -> f64 {
        a.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    #[test]
    fn fundamental_solution_values() {
        assert!(fundamental_solution(Vec2::ZERO, Vec2::new(1.0, 0.0)).unwrap().abs() < 1e-16);
        let v = fundamental_solution(Vec2::ZERO, Vec2::new(0.0, 2.0)).unwrap();
        assert!((v - 2f64.ln() / (2.0 * PI)).abs() < 1e-15);
        assert!(matches!(
            fundamental_solution(Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0)),
            Err(BdieError::SingularEvaluation { .. })
        ));
    }

    #[test]
    fn single_layer_circle_eigenvalues() {
        let g = circle_grid(128);
        let v = single_layer_matrix(&g);
        for n in 1..=8 {
            let f: Vec<f64> = g.t.iter().map(|t| (n as f64 * t).cos()).collect();
            let out = matvec(&v, &f);
            let err: Vec<f64> = out.iter().zip(&f).map(|(o, c)| o - c / (2.0 * n as f64)).collect();
            assert!(max_abs(&err) < 1e-10, "n={n}: {}", max_abs(&err));
        }
        // constants: log|x - y| integrates to zero on the unit circle
        let out = matvec(&v, &vec![1.0; 128]);
        assert!(max_abs(&out) < 1e-12);
    }

    #[test]
    fn double_layer_circle() {
        let g = circle_grid(128);
        let w = double_layer_matrix(&g);
        let one = matvec(&w, &vec![1.0; 128]);
        assert!(one.iter().all(|v| (v - 0.5).abs() < 1e-12));
        for n in 1..=8 {
            let f: Vec<f64> = g.t.iter().map(|t| (n as f64 * t).cos()).collect();
            assert!(max_abs(&matvec(&w, &f)) < 1e-12);
        }
    }

    #[test]
    fn hypersingular_circle_eigenvalues() {
        let g = circle_grid(128);
        let h = hypersingular_matrix(&g);
        for n in 1..=8 {
            let f: Vec<f64> = g.t.iter().map(|t| (n as f64 * t).cos()).collect();
            let out = matvec(&h, &f);
            let err: Vec<f64> = out.iter().zip(&f).map(|(o, c)| o - 0.5 * n as f64 * c).collect();
            assert!(max_abs(&err) < 1e-9, "n={n}: {}", max_abs(&err));
        }
        assert!(max_abs(&matvec(&h, &vec![1.0; 128])) < 1e-10);
    }

    #[test]
    fn adjoint_is_discrete_transpose() {
        let curve = CurveParametrization::star(1.0, 0.2, 3).unwrap();
        let g = BoundaryGrid::new(&curve, 64).unwrap();
        let w = double_layer_matrix(&g);
        let wp = adjoint_double_layer_matrix(&g);
        for i in 0..64 {
            for j in 0..64 {
                let lhs = g.weights[i] * wp[(i, j)];
                let rhs = w[(j, i)] * g.weights[j];
                assert!((lhs - rhs).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn gauss_identity_on_general_curves() {
        for curve in [CurveParametrization::ellipse(2.0, 1.0).unwrap(), CurveParametrization::star(1.0, 0.25, 5).unwrap()] {
            let g = BoundaryGrid::new(&curve, 256).unwrap();
            let w = double_layer_matrix(&g);
            let one = matvec(&w, &vec![1.0; 256]);
            assert!(one.iter().all(|v| (v - 0.5).abs() < 1e-10), "{}", max_abs(&one));
            let lp = LayerPotentials::new(&g).unwrap();
            let ones = vec![1.0; 256];
            for y in [Vec2::new(0.1, 0.2), Vec2::new(0.0, 0.3)] {
                assert!((lp.double_layer(y, &ones) - 1.0).abs() < 1e-10);
            }
            for y in [Vec2::new(3.0, 1.0), Vec2::new(0.0, 1.6), Vec2::new(2.01, 0.0)] {
                let (row, capped) = lp.double_layer_row(y);
                assert!(!capped.0);
                assert!(dot(&row, &ones).abs() < 1e-9, "{y:?}: {}", dot(&row, &ones));
            }
        }
    }

    #[test]
    fn single_layer_near_boundary_matches_series() {
        // For rho = cos(n t) on the unit circle, V rho(r, θ) = cos(nθ) / (2n r^n) outside.
        let g = circle_grid(64);
        let lp = LayerPotentials::new(&g).unwrap();
        for n in [1usize, 3, 6] {
            let rho: Vec<f64> = g.t.iter().map(|t| (n as f64 * t).cos()).collect();
            for r in [1.001, 1.01, 1.1, 2.0] {
                for theta in [0.0, 0.05, 1.3] {
                    let y = Vec2::polar(r, theta);
                    let exact = (n as f64 * theta).cos() / (2.0 * n as f64 * r.powi(n as i32));
                    let got = lp.single_layer(y, &rho);
                    assert!((got - exact).abs() < 1e-9, "n={n} r={r} θ={theta}: {got} vs {exact}");
                }
            }
        }
    }

    #[test]
    fn double_layer_near_boundary_matches_series() {
        // W cos(n·)(r, θ) = -cos(nθ) / (2 r^n) outside the unit circle, +r^n cos(nθ)/2 inside.
        let g = circle_grid(64);
        let lp = LayerPotentials::new(&g).unwrap();
        for n in [1usize, 4] {
            let tau: Vec<f64> = g.t.iter().map(|t| (n as f64 * t).cos()).collect();
            for r in [1.002, 1.05, 3.0, 0.5, 0.99] {
                let y = Vec2::polar(r, 0.4);
                let c = (n as f64 * 0.4).cos();
                let exact = if r > 1.0 { -c / (2.0 * r.powi(n as i32)) } else { c * r.powi(n as i32) / 2.0 };
                let got = lp.double_layer(y, &tau);
                assert!((got - exact).abs() < 1e-9, "n={n} r={r}: {got} vs {exact}");
            }
        }
    }

    #[test]
    fn single_layer_gradient_matches_difference() {
        let curve = CurveParametrization::ellipse(1.5, 1.0).unwrap();
        let g = BoundaryGrid::new(&curve, 128).unwrap();
        let lp = LayerPotentials::new(&g).unwrap();
        let rho: Vec<f64> = g.t.iter().map(|t| 1.0 + t.sin() + 0.3 * (2.0 * t).cos()).collect();
        let y = Vec2::new(1.2, 1.1);
        let ([gx, gy], _) = lp.single_layer_gradient_rows(y);
        let h = 1e-5;
        let fx = (lp.single_layer(y + Vec2::new(h, 0.0), &rho) - lp.single_layer(y - Vec2::new(h, 0.0), &rho)) / (2.0 * h);
        let fy = (lp.single_layer(y + Vec2::new(0.0, h), &rho) - lp.single_layer(y - Vec2::new(0.0, h), &rho)) / (2.0 * h);
        assert!((dot(&gx, &rho) - fx).abs() < 1e-8);
        assert!((dot(&gy, &rho) - fy).abs() < 1e-8);
    }

    #[test]
    fn exterior_trace_matches_jump_relation() {
        // W+ tau = -tau/2 + 𝒲 tau from the exterior side.
        let curve = CurveParametrization::star(1.0, 0.2, 3).unwrap();
        let g = BoundaryGrid::new(&curve, 128).unwrap();
        let lp = LayerPotentials::new(&g).unwrap();
        let tau: Vec<f64> = g.t.iter().map(|t| (t.cos() + 0.5 * (3.0 * t).sin()).exp()).collect();
        let w = double_layer_matrix(&g);
        let wt = matvec(&w, &tau);
        for i in [0usize, 17, 50] {
            let x = g.points[i];
            let nrm = g.normals[i];
            // Richardson on d, d/2 along the exterior normal
            let f = |d: f64| lp.double_layer(x - nrm * d, &tau);
            let d = 2e-3;
            let limit = 2.0 * f(d / 2.0) - f(d);
            let exact = -0.5 * tau[i] + wt[i];
            assert!((limit - exact).abs() < 1e-5, "i={i}: {limit} vs {exact}");
        }
    }
}
