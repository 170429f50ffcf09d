//! Boundary curve, boundary quadrature grid and the truncated exterior mesh.
//!
//! Orientation convention: every normal produced here points from the
//! unbounded domain into the bounded complement (the interior of the curve).
//! All sign-sensitive identities in the crate are written against this single
//! convention, see [`NORMAL_INTO_BOUNDED_SIDE`].

use crate::error::{BdieError, Result};
use crate::quadrature::{gauss_legendre_on, wrap_angle};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Multiplier applied to the inward (left-of-counterclockwise) normal.
/// `+1` means normals point into the bounded complement of the exterior domain.
pub const NORMAL_INTO_BOUNDED_SIDE: f64 = 1.0;

/// Built-in smooth closed curves, all parametrized counterclockwise on [0, 2pi).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CurveKind {
    Circle { radius: f64 },
    /// `(a cos t, b sin t)`.
    Ellipse { a: f64, b: f64 },
    /// Polar star `r(t) = radius * (1 + alpha cos(k t))`.
    Star { radius: f64, alpha: f64, k: u32 },
}

#[derive(Debug, Clone, Copy)]
struct Derivs {
    x: Vec2,
    d1: Vec2,
    d2: Vec2,
}

impl CurveKind {
    fn derivs(&self, t: f64) -> Derivs {
        let (s, c) = t.sin_cos();
        match *self {
            CurveKind::Circle { radius } => Derivs {
                x: Vec2::new(radius * c, radius * s),
                d1: Vec2::new(-radius * s, radius * c),
                d2: Vec2::new(-radius * c, -radius * s),
            },
            CurveKind::Ellipse { a, b } => Derivs {
                x: Vec2::new(a * c, b * s),
                d1: Vec2::new(-a * s, b * c),
                d2: Vec2::new(-a * c, -b * s),
            },
            CurveKind::Star { radius, alpha, k } => {
                let kf = k as f64;
                let (sk, ck) = (kf * t).sin_cos();
                let r = radius * (1.0 + alpha * ck);
                let r1 = -radius * alpha * kf * sk;
                let r2 = -radius * alpha * kf * kf * ck;
                let e = Vec2::new(c, s);
                let ep = e.perp();
                Derivs {
                    x: r * e,
                    d1: r1 * e + r * ep,
                    d2: r2 * e + 2.0 * r1 * ep - r * e,
                }
            }
        }
    }
}

/// Values of the parametrization at one parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub point: Vec2,
    pub tangent: Vec2,
    pub normal: Vec2,
    pub speed: f64,
}

/// A regular, simple, closed C² curve `x(t)`, `t` in [0, 2pi).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveParametrization {
    pub kind: CurveKind,
    /// All built-in curves are real-analytic; kernel quadratures rely on it.
    pub analytic: bool,
    orientation: f64,
}

const VALIDATION_SAMPLES: usize = 256;

impl CurveParametrization {
    pub fn new(kind: CurveKind) -> Result<Self> {
        match kind {
            CurveKind::Circle { radius } if !(radius > 0.0) => {
                return Err(BdieError::Geometry(format!("circle radius {radius} must be positive")))
            }
            CurveKind::Ellipse { a, b } if !(a > 0.0 && b > 0.0) => {
                return Err(BdieError::Geometry(format!("ellipse semi-axes ({a}, {b}) must be positive")))
            }
            CurveKind::Star { radius, alpha, k } if !(radius > 0.0 && alpha.abs() < 1.0 && k >= 1) => {
                return Err(BdieError::Geometry(format!(
                    "star curve needs radius > 0, |alpha| < 1, k >= 1 (got {radius}, {alpha}, {k})"
                )))
            }
            _ => {}
        }
        let mut curve = Self { kind, analytic: true, orientation: 1.0 };
        let samples: Vec<Vec2> = (0..VALIDATION_SAMPLES)
            .map(|j| curve.position(2.0 * PI * j as f64 / VALIDATION_SAMPLES as f64))
            .collect();
        for j in 0..VALIDATION_SAMPLES {
            let t = 2.0 * PI * j as f64 / VALIDATION_SAMPLES as f64;
            let speed = kind.derivs(t).d1.norm();
            if !(speed > 1e-12) {
                return Err(BdieError::DegenerateParametrization { t, speed });
            }
        }
        if !polygon_is_simple(&samples) {
            return Err(BdieError::Geometry("curve self-intersects".into()));
        }
        let area2: f64 = (0..VALIDATION_SAMPLES)
            .map(|j| samples[j].cross(samples[(j + 1) % VALIDATION_SAMPLES]))
            .sum();
        curve.orientation = area2.signum();
        Ok(curve)
    }

    pub fn circle(radius: f64) -> Result<Self> {
        Self::new(CurveKind::Circle { radius })
    }

    pub fn unit_circle() -> Self {
        Self::circle(1.0).expect("unit circle is valid")
    }

    pub fn ellipse(a: f64, b: f64) -> Result<Self> {
        Self::new(CurveKind::Ellipse { a, b })
    }

    pub fn star(radius: f64, alpha: f64, k: u32) -> Result<Self> {
        Self::new(CurveKind::Star { radius, alpha, k })
    }

    #[inline]
    pub fn position(&self, t: f64) -> Vec2 {
        self.kind.derivs(t).x
    }

    /// Position, first and second derivative.
    #[inline]
    pub fn derivatives(&self, t: f64) -> (Vec2, Vec2, Vec2) {
        let d = self.kind.derivs(t);
        (d.x, d.d1, d.d2)
    }

    /// +1 for counterclockwise parametrizations.
    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    pub fn circumradius(&self) -> f64 {
        (0..1024)
            .map(|j| self.position(2.0 * PI * j as f64 / 1024.0).norm())
            .fold(0.0, f64::max)
    }

    /// Point, unit tangent, unit normal (into the bounded side) and speed at `t`.
    pub fn eval(&self, t: f64) -> Result<CurvePoint> {
        let d = self.kind.derivs(t);
        let speed = d.d1.norm();
        if !(speed > 1e-12) {
            return Err(BdieError::DegenerateParametrization { t, speed });
        }
        let tangent = d.d1 * (1.0 / speed);
        let normal = tangent.perp() * (self.orientation * NORMAL_INTO_BOUNDED_SIDE);
        Ok(CurvePoint { point: d.x, tangent, normal, speed })
    }

    /// Winding number of the curve around `p` (1 inside for counterclockwise curves).
    pub fn winding_number(&self, p: Vec2) -> f64 {
        let m = 2048;
        let mut total = 0.0;
        let mut prev = self.position(0.0) - p;
        for j in 1..=m {
            let cur = self.position(2.0 * PI * j as f64 / m as f64) - p;
            total += prev.cross(cur).atan2(prev.dot(cur));
            prev = cur;
        }
        total / (2.0 * PI)
    }

    /// Signed polar angle `theta(t)` of `x(t)` and its derivative.
    fn polar_angle(&self, t: f64) -> (f64, f64) {
        let d = self.kind.derivs(t);
        (d.x.angle(), d.x.cross(d.d1) / d.x.norm_sq())
    }
}

/// `curve_eval` operation.
pub fn curve_eval(curve: &CurveParametrization, t: f64) -> Result<CurvePoint> {
    curve.eval(t)
}

fn segments_cross(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let d1 = (b - a).cross(c - a);
    let d2 = (b - a).cross(d - a);
    let d3 = (d - c).cross(a - c);
    let d4 = (d - c).cross(b - c);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

fn polygon_is_simple(p: &[Vec2]) -> bool {
    let n = p.len();
    for i in 0..n {
        let (a, b) = (p[i], p[(i + 1) % n]);
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_cross(a, b, p[j], p[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Equispaced periodic trapezoidal grid on the boundary curve.
#[derive(Debug, Clone)]
pub struct BoundaryGrid {
    pub curve: CurveParametrization,
    pub t: Vec<f64>,
    pub points: Vec<Vec2>,
    pub normals: Vec<Vec2>,
    pub tangents: Vec<Vec2>,
    pub speeds: Vec<f64>,
    /// Arc-length trapezoidal weights `(2pi/N)|x'(t_j)|`.
    pub weights: Vec<f64>,
    /// Second derivative of the parametrization at the nodes.
    pub second_derivatives: Vec<Vec2>,
}

impl BoundaryGrid {
    pub fn new(curve: &CurveParametrization, n: usize) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(BdieError::InvalidDiscretization(format!(
                "boundary node count must be even and at least 8, got {n}"
            )));
        }
        let h = 2.0 * PI / n as f64;
        let mut grid = BoundaryGrid {
            curve: curve.clone(),
            t: Vec::with_capacity(n),
            points: Vec::with_capacity(n),
            normals: Vec::with_capacity(n),
            tangents: Vec::with_capacity(n),
            speeds: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
            second_derivatives: Vec::with_capacity(n),
        };
        for j in 0..n {
            let t = h * j as f64;
            let cp = curve.eval(t)?;
            let (_, _, d2) = curve.derivatives(t);
            grid.t.push(t);
            grid.points.push(cp.point);
            grid.normals.push(cp.normal);
            grid.tangents.push(cp.tangent);
            grid.speeds.push(cp.speed);
            grid.weights.push(h * cp.speed);
            grid.second_derivatives.push(d2);
        }
        Ok(grid)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.t.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn length(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Same nodes with every normal reversed. Only meant as a negative control
    /// for orientation-sensitive identities.
    pub fn with_flipped_normals(&self) -> Self {
        let mut g = self.clone();
        for n in &mut g.normals {
            *n = -*n;
        }
        g
    }

    /// Discrete arc-length inner product.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.weights).map(|((x, y), w)| x * y * w).sum()
    }

    /// Discrete L²(S) norm.
    pub fn norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).sqrt()
    }

    /// Minimum distance from `y` to the grid nodes.
    pub fn node_distance(&self, y: Vec2) -> f64 {
        self.points.iter().map(|p| (*p - y).norm()).fold(f64::INFINITY, f64::min)
    }

    /// Samples a function of the boundary point.
    pub fn sample(&self, f: impl Fn(Vec2) -> f64) -> Vec<f64> {
        self.points.iter().map(|&p| f(p)).collect()
    }
}

/// `boundary_grid` operation.
pub fn boundary_grid(curve: &CurveParametrization, n: usize) -> Result<BoundaryGrid> {
    BoundaryGrid::new(curve, n)
}

/// Discretization parameters of the exterior mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshOptions {
    /// Truncation radius of the exterior domain.
    pub r_trunc: f64,
    /// Target node spacing along the boundary ring.
    pub h: f64,
    /// Gauss–Legendre nodes per radial panel.
    pub radial_order: usize,
    /// Explicit angular node count; derived from `h` when `None`.
    pub angular_nodes: Option<usize>,
    /// Explicit radial panel count; derived from `h` when `None`.
    pub radial_panels: Option<usize>,
}

impl MeshOptions {
    pub fn new(r_trunc: f64, h: f64) -> Self {
        Self { r_trunc, h, radial_order: 8, angular_nodes: None, radial_panels: None }
    }
}

/// Mapped point of the exterior mesh parametrization.
#[derive(Debug, Clone, Copy)]
pub struct MapPoint {
    pub x: Vec2,
    pub dt: Vec2,
    pub ds: Vec2,
    pub jacobian: f64,
}

/// Tensor quadrature mesh of the truncated exterior domain.
///
/// The region between `S` and the circle of radius `r_trunc` is covered by
/// `X(t, s) = |x(t)|^(1-s) r_trunc^s x(t)/|x(t)|`, which moves each boundary
/// point along its ray with geometric radial spacing. The parameter `t` is
/// sampled with the periodic trapezoidal rule and `s` with composite
/// Gauss–Legendre panels. Requires a curve that is star-shaped with respect
/// to the origin.
#[derive(Debug, Clone)]
pub struct DomainMesh {
    pub curve: CurveParametrization,
    pub r_trunc: f64,
    pub nt: usize,
    pub radial_order: usize,
    /// Panel edges in `s`, starting at 0.
    pub panel_edges: Vec<f64>,
    pub s_nodes: Vec<f64>,
    s_weights: Vec<f64>,
    /// Node positions, ring-major: index `l * nt + k`.
    pub nodes: Vec<Vec2>,
    pub weights: Vec<f64>,
    /// Nodes inside the coefficient-perturbation support region.
    pub in_support: Vec<bool>,
    pub support_radius: f64,
    /// Largest node spacing on the innermost ring (angular or radial).
    pub h: f64,
}

impl DomainMesh {
    pub fn new(curve: &CurveParametrization, opts: &MeshOptions) -> Result<Self> {
        let rc = curve.circumradius();
        if !(opts.r_trunc > rc) {
            return Err(BdieError::Geometry(format!(
                "truncation radius {} must exceed the curve circumradius {rc:.6}",
                opts.r_trunc
            )));
        }
        if !(opts.h > 0.0) {
            return Err(BdieError::InvalidDiscretization(format!("mesh spacing h = {} must be positive", opts.h)));
        }
        if opts.radial_order < 2 {
            return Err(BdieError::InvalidDiscretization("radial order must be at least 2".into()));
        }
        for j in 0..VALIDATION_SAMPLES {
            let t = 2.0 * PI * j as f64 / VALIDATION_SAMPLES as f64;
            let (_, dtheta) = curve.polar_angle(t);
            if !(dtheta > 0.0) {
                return Err(BdieError::Geometry(
                    "exterior mesh requires a counterclockwise curve star-shaped about the origin".into(),
                ));
            }
        }
        let perimeter = BoundaryGrid::new(curve, 1024)?.length();
        let nt = match opts.angular_nodes {
            Some(n) => n,
            None => {
                let n = (perimeter / opts.h).ceil() as usize;
                (n + n % 2).max(8)
            }
        };
        if nt < 8 || nt % 2 != 0 {
            return Err(BdieError::InvalidDiscretization(format!("angular node count must be even and >= 8, got {nt}")));
        }
        let q = opts.radial_order;
        let max_radial_speed = (0..nt)
            .map(|k| {
                let rho = curve.position(2.0 * PI * k as f64 / nt as f64).norm();
                rho * (opts.r_trunc / rho).ln()
            })
            .fold(0.0, f64::max);
        let panels = match opts.radial_panels {
            Some(p) => p,
            None => ((max_radial_speed / (q as f64 * opts.h)).ceil() as usize).max(1),
        };
        if panels == 0 {
            return Err(BdieError::InvalidDiscretization("at least one radial panel is required".into()));
        }
        let panel_edges: Vec<f64> = (0..=panels).map(|p| p as f64 / panels as f64).collect();
        let mut mesh = DomainMesh {
            curve: curve.clone(),
            r_trunc: opts.r_trunc,
            nt,
            radial_order: q,
            panel_edges,
            s_nodes: Vec::new(),
            s_weights: Vec::new(),
            nodes: Vec::new(),
            weights: Vec::new(),
            in_support: Vec::new(),
            support_radius: f64::INFINITY,
            h: opts.h,
        };
        mesh.rebuild_nodes();
        let ring_spacing = perimeter / nt as f64;
        let radial_spacing = max_radial_speed / (panels * q) as f64;
        mesh.h = ring_spacing.max(radial_spacing);
        // Each first-ring node must sit at least a tenth of its own radial
        // spacing away from the curve.
        let ds0 = mesh.panel_edges[1] / q as f64;
        for k in 0..nt {
            let t = 2.0 * PI * k as f64 / nt as f64;
            let local = mesh.map(t, 0.0).ds.norm() * ds0;
            let dist = distance_to_curve(curve, mesh.nodes[k]);
            if !(dist > local / 10.0) {
                return Err(BdieError::InvalidDiscretization(format!(
                    "first mesh ring lies {dist:.3e} from the boundary, below h/10 = {:.3e}; lower the radial order",
                    local / 10.0
                )));
            }
        }
        Ok(mesh)
    }

    fn rebuild_nodes(&mut self) {
        let q = self.radial_order;
        self.s_nodes.clear();
        self.s_weights.clear();
        for p in 0..self.panel_edges.len() - 1 {
            let (x, w) = gauss_legendre_on(q, self.panel_edges[p], self.panel_edges[p + 1]);
            self.s_nodes.extend(x);
            self.s_weights.extend(w);
        }
        let ht = 2.0 * PI / self.nt as f64;
        self.nodes.clear();
        self.weights.clear();
        for (l, &s) in self.s_nodes.iter().enumerate() {
            for k in 0..self.nt {
                let mp = self.map(ht * k as f64, s);
                self.nodes.push(mp.x);
                self.weights.push(mp.jacobian * ht * self.s_weights[l]);
            }
        }
        self.in_support = self.nodes.iter().map(|p| p.norm() <= self.support_radius).collect();
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn radial_len(&self) -> usize {
        self.s_nodes.len()
    }

    pub fn panels(&self) -> usize {
        self.panel_edges.len() - 1
    }

    /// Largest parameter `s` covered by this mesh (1 unless restricted).
    pub fn s_max(&self) -> f64 {
        *self.panel_edges.last().unwrap()
    }

    /// Parameters `(t, s)` of node `i`.
    pub fn node_params(&self, i: usize) -> (f64, f64) {
        let l = i / self.nt;
        let k = i % self.nt;
        (2.0 * PI * k as f64 / self.nt as f64, self.s_nodes[l])
    }

    /// Tags nodes with `|x| <= r` as belonging to the coefficient support.
    pub fn with_support_radius(mut self, r: f64) -> Self {
        self.support_radius = r;
        self.in_support = self.nodes.iter().map(|p| p.norm() <= r).collect();
        self
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    pub fn sample(&self, f: impl Fn(Vec2) -> f64) -> Vec<f64> {
        self.nodes.iter().map(|&p| f(p)).collect()
    }

    /// Mapping `X(t, s)` with its partial derivatives and Jacobian.
    pub fn map(&self, t: f64, s: f64) -> MapPoint {
        let (x, d1, _) = self.curve.derivatives(t);
        let rho = x.norm();
        let rho_t = x.dot(d1) / rho;
        let theta_t = x.cross(d1) / (rho * rho);
        let e = x * (1.0 / rho);
        let ep = e.perp();
        let log_ratio = (self.r_trunc / rho).ln();
        let r = rho * (s * log_ratio).exp();
        let r_t = r * (1.0 - s) * rho_t / rho;
        let r_s = r * log_ratio;
        MapPoint {
            x: r * e,
            dt: r_t * e + (r * theta_t) * ep,
            ds: r_s * e,
            jacobian: r * theta_t * r_s,
        }
    }

    /// Inverse of [`DomainMesh::map`]; `s < 0` means the point is inside the curve.
    pub fn inverse(&self, y: Vec2) -> (f64, f64) {
        let target = y.angle();
        let mut t = target.rem_euclid(2.0 * PI);
        for _ in 0..60 {
            let (theta, dtheta) = self.curve.polar_angle(t);
            let f = wrap_angle(theta - target);
            t -= f / dtheta;
            if f.abs() < 1e-15 {
                break;
            }
        }
        let t = t.rem_euclid(2.0 * PI);
        let rho = self.curve.position(t).norm();
        let s = (y.norm() / rho).ln() / (self.r_trunc / rho).ln();
        (t, s)
    }

    /// Index of the panel containing `s` (clamped to the mesh range).
    pub fn panel_of(&self, s: f64) -> usize {
        let p = self.panels();
        match self.panel_edges.iter().position(|&e| e > s) {
            Some(0) => 0,
            Some(i) => (i - 1).min(p - 1),
            None => p - 1,
        }
    }

    /// Characteristic node spacing around parameter `(t, s)`.
    pub fn local_spacing(&self, t: f64, s: f64) -> f64 {
        let mp = self.map(t, s);
        let p = self.panel_of(s);
        let ds = (self.panel_edges[p + 1] - self.panel_edges[p]) / self.radial_order as f64;
        (mp.dt.norm() * 2.0 * PI / self.nt as f64).max(mp.ds.norm() * ds)
    }

    /// Sub-mesh made of the leading radial panels whose inner ring lies
    /// within radius `r`. Returns `None` when no panel qualifies.
    pub fn restrict_to_radius(&self, r: f64) -> Option<DomainMesh> {
        let mut keep = 0;
        for p in 0..self.panels() {
            let s0 = self.panel_edges[p];
            let inner = (0..self.nt)
                .map(|k| self.map(2.0 * PI * k as f64 / self.nt as f64, s0).x.norm())
                .fold(f64::INFINITY, f64::min);
            if inner < r {
                keep = p + 1;
            } else {
                break;
            }
        }
        if keep == 0 {
            return None;
        }
        let mut sub = self.clone();
        sub.panel_edges.truncate(keep + 1);
        sub.rebuild_nodes();
        let support = self.support_radius;
        Some(sub.with_support_radius(support))
    }

    /// Outer radius reached by this (possibly restricted) mesh, minimum over angles.
    pub fn outer_radius(&self) -> f64 {
        let s = self.s_max();
        (0..self.nt)
            .map(|k| self.map(2.0 * PI * k as f64 / self.nt as f64, s).x.norm())
            .fold(f64::INFINITY, f64::min)
    }

    /// Nodes on the outermost ring.
    pub fn outer_ring(&self) -> std::ops::Range<usize> {
        let l = self.radial_len() - 1;
        l * self.nt..(l + 1) * self.nt
    }

    /// Weighted discrete L² inner product.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).zip(&self.weights).map(|((x, y), w)| x * y * w).sum()
    }
}

/// `domain_mesh` operation with default radial order.
pub fn domain_mesh(curve: &CurveParametrization, r_trunc: f64, h: f64) -> Result<DomainMesh> {
    DomainMesh::new(curve, &MeshOptions::new(r_trunc, h))
}

/// Distance from `p` to the curve, by dense sampling and Newton refinement.
pub fn distance_to_curve(curve: &CurveParametrization, p: Vec2) -> f64 {
    let m = 512;
    let mut best_t = 0.0;
    let mut best = f64::INFINITY;
    for j in 0..m {
        let t = 2.0 * PI * j as f64 / m as f64;
        let d = (curve.position(t) - p).norm_sq();
        if d < best {
            best = d;
            best_t = t;
        }
    }
    let mut t = best_t;
    for _ in 0..30 {
        let (x, d1, d2) = curve.derivatives(t);
        let r = x - p;
        let g = r.dot(d1);
        let gp = d1.dot(d1) + r.dot(d2);
        if gp.abs() < 1e-300 {
            break;
        }
        let step = g / gp;
        t -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    (curve.position(t) - p).norm().min(best.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ellipse_perimeter_oracle(a: f64, b: f64) -> f64 {
        // Adaptive 10-point Gauss–Legendre on the arc-length integrand.
        fn adapt(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, whole: f64, depth: u32) -> f64 {
            let mid = 0.5 * (lo + hi);
            let left = gl10(f, lo, mid);
            let right = gl10(f, mid, hi);
            if depth > 30 || (left + right - whole).abs() < 1e-15 {
                left + right
            } else {
                adapt(f, lo, mid, left, depth + 1) + adapt(f, mid, hi, right, depth + 1)
            }
        }
        fn gl10(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
            let (x, w) = gauss_legendre_on(10, lo, hi);
            x.iter().zip(&w).map(|(xi, wi)| wi * f(*xi)).sum()
        }
        let f = |t: f64| (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt();
        adapt(&f, 0.0, 2.0 * PI, gl10(&f, 0.0, 2.0 * PI), 0)
    }

    #[test]
    fn unit_circle_orientation_examples() {
        let c = CurveParametrization::unit_circle();
        let p = curve_eval(&c, 0.0).unwrap();
        assert!((p.point - Vec2::new(1.0, 0.0)).norm() < 1e-15);
        assert!((p.normal - Vec2::new(-1.0, 0.0)).norm() < 1e-15);
        let p = curve_eval(&c, PI / 2.0).unwrap();
        assert!((p.point - Vec2::new(0.0, 1.0)).norm() < 1e-15);
        assert!((p.normal - Vec2::new(0.0, -1.0)).norm() < 1e-15);
    }

    #[test]
    fn ellipse_eval_matches_analytic_derivative() {
        let c = CurveParametrization::ellipse(2.0, 1.0).unwrap();
        let p = curve_eval(&c, 0.0).unwrap();
        assert!((p.point - Vec2::new(2.0, 0.0)).norm() < 1e-15);
        assert!((p.speed - 1.0).abs() < 1e-15);
        assert!((p.normal - Vec2::new(-1.0, 0.0)).norm() < 1e-15);
        // central difference of the position against the reported tangent*speed
        let t = 0.7;
        let e = 1e-6;
        let fd = (c.position(t + e) - c.position(t - e)) * (0.5 / e);
        let cp = c.eval(t).unwrap();
        assert!((fd - cp.tangent * cp.speed).norm() < 1e-9);
    }

    #[test]
    fn normals_point_into_bounded_side() {
        for curve in [
            CurveParametrization::unit_circle(),
            CurveParametrization::ellipse(2.0, 1.0).unwrap(),
            CurveParametrization::star(1.0, 0.2, 5).unwrap(),
        ] {
            for j in 0..32 {
                let t = 2.0 * PI * j as f64 / 32.0;
                let cp = curve.eval(t).unwrap();
                let inside = curve.winding_number(cp.point + cp.normal * 1e-3);
                let outside = curve.winding_number(cp.point - cp.normal * 1e-3);
                assert!((inside - 1.0).abs() < 1e-6, "{:?} t={t}", curve.kind);
                assert!(outside.abs() < 1e-6);
                assert!((cp.normal.norm() - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn grid_lengths() {
        let c = CurveParametrization::unit_circle();
        let g = boundary_grid(&c, 64).unwrap();
        assert!((g.length() - 2.0 * PI).abs() < 1e-12);
        let e = CurveParametrization::ellipse(2.0, 1.0).unwrap();
        let g = boundary_grid(&e, 256).unwrap();
        let oracle = ellipse_perimeter_oracle(2.0, 1.0);
        assert!((oracle - 9.688448220547675).abs() < 1e-12);
        assert!((g.length() - oracle).abs() < 1e-12);
    }

    #[test]
    fn boundary_weights_converge_spectrally() {
        let e = CurveParametrization::ellipse(2.0, 1.0).unwrap();
        let oracle = ellipse_perimeter_oracle(2.0, 1.0);
        let errs: Vec<f64> = [16, 32, 64].iter().map(|&n| (boundary_grid(&e, n).unwrap().length() - oracle).abs()).collect();
        assert!(errs[1] < errs[0] * 1e-2);
        assert!(errs[2] < 1e-11);
    }

    #[test]
    fn odd_or_tiny_grid_rejected() {
        let c = CurveParametrization::unit_circle();
        assert!(matches!(boundary_grid(&c, 7), Err(BdieError::InvalidDiscretization(_))));
        assert!(boundary_grid(&c, 6).is_err());
    }

    #[test]
    fn degenerate_and_self_intersecting_curves_rejected() {
        assert!(CurveParametrization::circle(0.0).is_err());
        assert!(CurveParametrization::star(1.0, 1.2, 3).is_err());
    }

    #[test]
    fn annulus_mesh_area() {
        let c = CurveParametrization::unit_circle();
        let m = domain_mesh(&c, 4.0, 0.1).unwrap();
        assert!((m.total_weight() - 15.0 * PI).abs() < 1e-10, "{}", m.total_weight());
        assert!(m.weights.iter().all(|&w| w > 0.0));
        for &p in &m.nodes {
            assert!(p.norm() > 1.0 && p.norm() < 4.0);
        }
    }

    #[test]
    fn mesh_area_self_convergence() {
        // Ellipse exterior within the radius-5 disk: area = 25 pi - 2 pi.
        let e = CurveParametrization::ellipse(2.0, 1.0).unwrap();
        let exact = 25.0 * PI - 2.0 * PI;
        let err = |h: f64| {
            let mut o = MeshOptions::new(5.0, h);
            o.radial_order = 6;
            (DomainMesh::new(&e, &o).unwrap().total_weight() - exact).abs()
        };
        let (e1, e2, e3) = (err(0.8), err(0.4), err(0.2));
        assert!(e2 < e1 / 16.0 || e2 < 1e-11, "{e1} {e2}");
        assert!(e3 < e2 / 16.0 || e3 < 1e-11, "{e2} {e3}");
    }

    #[test]
    fn mesh_rejects_small_truncation() {
        let c = CurveParametrization::unit_circle();
        assert!(matches!(domain_mesh(&c, 0.5, 0.1), Err(BdieError::Geometry(_))));
    }

    #[test]
    fn mesh_nodes_keep_off_boundary_and_invert() {
        let c = CurveParametrization::star(1.0, 0.15, 4).unwrap();
        let m = domain_mesh(&c, 3.0, 0.15).unwrap();
        for (i, &p) in m.nodes.iter().enumerate() {
            assert!(distance_to_curve(&c, p) > m.h / 10.0);
            assert!(c.winding_number(p).abs() < 1e-6);
            let (t, s) = m.inverse(p);
            let (t0, s0) = m.node_params(i);
            assert!(wrap_angle(t - t0).abs() < 1e-11 && (s - s0).abs() < 1e-11);
        }
        let (_, s) = m.inverse(Vec2::new(0.2, 0.1));
        assert!(s < 0.0);
    }

    #[test]
    fn mesh_jacobian_matches_finite_differences() {
        let c = CurveParametrization::ellipse(1.5, 1.0).unwrap();
        let m = domain_mesh(&c, 4.0, 0.3).unwrap();
        let (t, s, e) = (1.1, 0.37, 1e-6);
        let mp = m.map(t, s);
        let dt = (m.map(t + e, s).x - m.map(t - e, s).x) * (0.5 / e);
        let ds = (m.map(t, s + e).x - m.map(t, s - e).x) * (0.5 / e);
        assert!((dt - mp.dt).norm() < 1e-8);
        assert!((ds - mp.ds).norm() < 1e-8);
        assert!((dt.cross(ds).abs() - mp.jacobian).abs() < 1e-7);
    }

    #[test]
    fn restricted_mesh_keeps_inner_panels() {
        let c = CurveParametrization::unit_circle();
        let mut o = MeshOptions::new(6.0, 0.2);
        o.radial_panels = Some(6);
        let m = DomainMesh::new(&c, &o).unwrap();
        let sub = m.restrict_to_radius(2.5).unwrap();
        assert!(sub.panels() < m.panels());
        assert_eq!(&m.nodes[..sub.len()], &sub.nodes[..]);
        assert!(m.restrict_to_radius(0.5).is_none());
    }
}
