//! Volume integrals of the harmonic kernel and its gradient over the mesh.
//!
//! For a target `y` with mesh parameters `(t0, s0)` the integrand is split by
//! a smooth bump `eta(|z| / r_c)` in the local coordinates `z = J0 (dt, ds)`,
//! `J0` the Jacobian of the mesh map at the target. The far part
//! `(1 - eta) K g` is smooth and uses the mesh rule directly. The near part
//! is integrated in polar coordinates about `y`, with `rho = rho_max tau²` to
//! absorb the logarithm, over the disk clipped by the images of `s = 0` and
//! `s = s_max` (straight lines in `z`). Mesh data are interpolated to the
//! polar nodes with local Lagrange stencils in `t` and `s`.

use crate::geometry::DomainMesh;
use crate::quadrature::{gauss_legendre_on, lagrange_basis, wrap_angle};
use crate::vec2::Vec2;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const INV_2PI: f64 = 0.5 / PI;
/// Points in the periodic Lagrange stencil along `t`.
const T_STENCIL: usize = 8;

/// Tuning of the local polar correction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeOptions {
    /// Smallest cutoff radius of the polar patch.
    pub min_cutoff: f64,
    /// Cutoff radius in units of the local mesh spacing.
    pub cutoff_spacings: f64,
    /// Gauss nodes in the radial variable `tau`.
    pub radial_points: usize,
    /// Angular nodes on a full circle.
    pub angular_points: usize,
}

impl Default for VolumeOptions {
    fn default() -> Self {
        Self { min_cutoff: 0.5, cutoff_spacings: 24.0, radial_points: 24, angular_points: 64 }
    }
}

/// Where a volume integral is evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    /// Mesh node index.
    Node(usize),
    /// Boundary point with curve parameter `t`.
    Boundary(f64),
    /// Arbitrary point.
    Point(Vec2),
}

/// Kernel triple `(P, d_y1 P, d_y2 P)` at offset `d = x - y`.
#[inline]
pub fn kernel_triple(d: Vec2) -> [f64; 3] {
    let r2 = d.norm_sq();
    [0.5 * INV_2PI * r2.ln(), -INV_2PI * d.x / r2, -INV_2PI * d.y / r2]
}

/// A weight function `c(x) = (c0, c1, c2)` multiplying the kernel triple,
/// cached at the mesh nodes and evaluated exactly elsewhere.
pub struct Weighting<'a> {
    nodes: Vec<[f64; 3]>,
    f: Box<dyn Fn(Vec2) -> [f64; 3] + Sync + 'a>,
}

impl<'a> Weighting<'a> {
    pub fn new(mesh: &DomainMesh, f: impl Fn(Vec2) -> [f64; 3] + Sync + 'a) -> Self {
        Self { nodes: mesh.nodes.iter().map(|&p| f(p)).collect(), f: Box::new(f) }
    }

    /// Plain Newtonian kernel `P`.
    pub fn value(mesh: &DomainMesh) -> Self {
        Self::new(mesh, |_| [1.0, 0.0, 0.0])
    }

    #[inline]
    fn at(&self, x: Vec2) -> [f64; 3] {
        (self.f)(x)
    }
}

#[inline]
fn bump(u: f64) -> f64 {
    if u <= 0.0 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        (2.0 * (-1.0 / u).exp() / (u - 1.0)).exp()
    }
}

#[derive(Debug, Clone, Copy)]
struct PolarNode {
    t: f64,
    s: f64,
    x: Vec2,
    /// Area weight including the bump and the map Jacobian.
    w: f64,
}

/// Local frame of a target.
#[derive(Debug, Clone, Copy)]
struct Frame {
    y: Vec2,
    t0: f64,
    s0: f64,
    /// Columns `X_t`, `X_s`.
    dt: Vec2,
    ds: Vec2,
    det: f64,
    r_c: f64,
}

impl Frame {
    #[inline]
    fn to_z(&self, dt: f64, ds: f64) -> Vec2 {
        self.dt * dt + self.ds * ds
    }

    #[inline]
    fn from_z(&self, z: Vec2) -> (f64, f64) {
        let inv = 1.0 / self.det;
        ((self.ds.y * z.x - self.ds.x * z.y) * inv, (-self.dt.y * z.x + self.dt.x * z.y) * inv)
    }

    /// Gradient of `s` with respect to `z`.
    fn s_gradient(&self) -> Vec2 {
        Vec2::new(-self.dt.y, self.dt.x) * (1.0 / self.det)
    }
}

/// Volume quadrature over a [`DomainMesh`].
#[derive(Debug, Clone)]
pub struct VolumeQuadrature {
    pub mesh: DomainMesh,
    pub opts: VolumeOptions,
    tau: (Vec<f64>, Vec<f64>),
    t_params: Vec<f64>,
    s_params: Vec<f64>,
}

impl VolumeQuadrature {
    pub fn new(mesh: &DomainMesh, opts: VolumeOptions) -> Self {
        let t_params = (0..mesh.len()).map(|i| mesh.node_params(i).0).collect();
        let s_params = (0..mesh.len()).map(|i| mesh.node_params(i).1).collect();
        Self { mesh: mesh.clone(), opts, tau: gauss_legendre_on(opts.radial_points, 0.0, 1.0), t_params, s_params }
    }

    fn frame(&self, target: Target) -> Option<Frame> {
        let (y, t0, s0) = match target {
            Target::Node(i) => {
                let (t, s) = self.mesh.node_params(i);
                (self.mesh.nodes[i], t, s)
            }
            Target::Boundary(t) => (self.mesh.curve.position(t), t, 0.0),
            Target::Point(y) => {
                let (t, s) = self.mesh.inverse(y);
                (y, t, s)
            }
        };
        let tol = 1e-12;
        if s0 < -tol || s0 > self.mesh.s_max() + tol {
            return None;
        }
        let s0 = s0.clamp(0.0, self.mesh.s_max());
        let mp = self.mesh.map(t0, s0);
        let h = self.mesh.local_spacing(t0, s0);
        // keep the patch within about a radian in t
        let t_span = Vec2::new(mp.ds.y, -mp.ds.x).norm() / mp.dt.cross(mp.ds).abs();
        let r_c = self.opts.min_cutoff.max(self.opts.cutoff_spacings * h).min(1.2 / t_span);
        Some(Frame { y, t0, s0, dt: mp.dt, ds: mp.ds, det: mp.dt.cross(mp.ds), r_c })
    }

    /// Cutoff radius used for the target.
    pub fn cutoff_radius(&self, target: Target) -> Option<f64> {
        self.frame(target).map(|f| f.r_c)
    }

    fn polar_nodes(&self, f: &Frame) -> Vec<PolarNode> {
        let g = f.s_gradient();
        let gn = g.norm();
        let e = g * (1.0 / gn);
        // (unit normal pointing out of the strip, distance) for both cut lines
        let lines = [(-e, f.s0 / gn), (e, (self.mesh.s_max() - f.s0) / gn)];
        let r_c = f.r_c;
        let mut breaks = Vec::new();
        for (n, d) in lines {
            if d < r_c {
                let alpha = (d / r_c).acos();
                let phi = n.angle();
                breaks.push(phi - alpha);
                breaks.push(phi + alpha);
            }
        }
        // (phi, dphi weight, rho_max) triples
        let mut rays: Vec<(f64, f64, f64)> = Vec::new();
        let na = self.opts.angular_points;
        if breaks.is_empty() {
            let w = 2.0 * PI / na as f64;
            for k in 0..na {
                rays.push((w * k as f64, w, r_c));
            }
        } else {
            let base = breaks[0];
            let mut b: Vec<f64> = breaks.iter().map(|&p| base + (p - base).rem_euclid(2.0 * PI)).collect();
            b.sort_by(|a, c| a.partial_cmp(c).unwrap());
            b.push(base + 2.0 * PI);
            for w in b.windows(2) {
                let (pa, pb) = (w[0], w[1]);
                if pb - pa < 1e-15 {
                    continue;
                }
                let mid = Vec2::polar(1.0, 0.5 * (pa + pb));
                let active = lines.iter().find(|(n, d)| {
                    let c = n.dot(mid);
                    c > 0.0 && *d < r_c * c
                });
                match active {
                    None => {
                        let m = ((na as f64 * (pb - pa) / (2.0 * PI)).ceil() as usize).max(6);
                        let (x, wx) = gauss_legendre_on(m, pa, pb);
                        for (p, wp) in x.into_iter().zip(wx) {
                            rays.push((p, wp, r_c));
                        }
                    }
                    Some(&(n, d)) => {
                        if d < 1e-12 * r_c {
                            continue;
                        }
                        let phi_n = n.angle();
                        let va = wrap_angle(pa - phi_n).tan().asinh();
                        let vb = wrap_angle(pb - phi_n).tan().asinh();
                        let m = ((3.0 * (vb - va)).ceil() as usize + 8).max(12);
                        let (x, wx) = gauss_legendre_on(m, va, vb);
                        for (v, wv) in x.into_iter().zip(wx) {
                            let ch = v.cosh();
                            rays.push((phi_n + v.sinh().atan(), wv / ch, d * ch));
                        }
                    }
                }
            }
        }
        let (tau, wt) = &self.tau;
        let mut out = Vec::with_capacity(rays.len() * tau.len());
        let inv_det = 1.0 / f.det.abs();
        let s_max = self.mesh.s_max();
        for (phi, wphi, rmax) in rays {
            let dir = Vec2::polar(1.0, phi);
            for (&tk, &wk) in tau.iter().zip(wt) {
                let rho = rmax * tk * tk;
                let eta = bump(rho / r_c);
                if eta == 0.0 {
                    continue;
                }
                let (dt, ds) = f.from_z(dir * rho);
                let t = f.t0 + dt;
                let s = (f.s0 + ds).clamp(0.0, s_max);
                let mp = self.mesh.map(t, s);
                let w = 2.0 * rmax * rmax * tk * tk * tk * wk * wphi * eta * mp.jacobian * inv_det;
                out.push(PolarNode { t, s, x: mp.x, w });
            }
        }
        out
    }

    /// Interpolation stencil at `(t, s)`: node indices and weights.
    fn stencil(&self, t: f64, s: f64, idx: &mut Vec<usize>, wts: &mut Vec<f64>) {
        let mesh = &self.mesh;
        let nt = mesh.nt;
        let ht = 2.0 * PI / nt as f64;
        let tt = t.rem_euclid(2.0 * PI);
        let k0 = (tt / ht).floor() as isize - (T_STENCIL as isize / 2 - 1);
        let tnodes: Vec<f64> = (0..T_STENCIL).map(|a| (k0 + a as isize) as f64 * ht).collect();
        let mut lt = [0.0; T_STENCIL];
        lagrange_basis(&tnodes, tt, &mut lt);
        let q = mesh.radial_order;
        let p = mesh.panel_of(s);
        let snodes = &mesh.s_nodes[p * q..(p + 1) * q];
        let mut ls = vec![0.0; q];
        lagrange_basis(snodes, s, &mut ls);
        idx.clear();
        wts.clear();
        for (b, &lsb) in ls.iter().enumerate() {
            let l = p * q + b;
            for (a, &lta) in lt.iter().enumerate() {
                let k = (k0 + a as isize).rem_euclid(nt as isize) as usize;
                idx.push(l * nt + k);
                wts.push(lsb * lta);
            }
        }
    }

    #[inline]
    fn far_factor(&self, f: &Frame, i: usize) -> f64 {
        let dt = wrap_angle(self.t_params[i] - f.t0);
        let ds = self.s_params[i] - f.s0;
        1.0 - bump(f.to_z(dt, ds).norm() / f.r_c)
    }

    /// Row `r` over the mesh nodes with
    /// `Σ_i r_i g(x_i) ≈ ∫ (c0 P + c1 d_y1 P + c2 d_y2 P)(x - y) g(x) dx`.
    pub fn row(&self, target: Target, c: &Weighting) -> Vec<f64> {
        let mesh = &self.mesh;
        let mut row = vec![0.0; mesh.len()];
        let frame = self.frame(target);
        let y = match (frame, target) {
            (Some(f), _) => f.y,
            (None, Target::Point(y)) => y,
            (None, Target::Boundary(t)) => mesh.curve.position(t),
            (None, Target::Node(i)) => mesh.nodes[i],
        };
        for i in 0..mesh.len() {
            let fac = match &frame {
                Some(f) => self.far_factor(f, i),
                None => 1.0,
            };
            if fac == 0.0 {
                continue;
            }
            let k = kernel_triple(mesh.nodes[i] - y);
            let cw = c.nodes[i];
            row[i] = fac * mesh.weights[i] * (k[0] * cw[0] + k[1] * cw[1] + k[2] * cw[2]);
        }
        if let Some(f) = frame {
            let mut idx = Vec::new();
            let mut wts = Vec::new();
            for pn in self.polar_nodes(&f) {
                let k = kernel_triple(pn.x - y);
                let cw = c.at(pn.x);
                let val = pn.w * (k[0] * cw[0] + k[1] * cw[1] + k[2] * cw[2]);
                if val == 0.0 {
                    continue;
                }
                self.stencil(pn.t, pn.s, &mut idx, &mut wts);
                for (&j, &wj) in idx.iter().zip(&wts) {
                    row[j] += val * wj;
                }
            }
        }
        row
    }

    /// `∫ (c0 P + c1 d_y1 P + c2 d_y2 P)(x - y) dx` for a known source `c`.
    pub fn apply(&self, target: Target, c: &Weighting) -> f64 {
        let mesh = &self.mesh;
        let frame = self.frame(target);
        let y = match (frame, target) {
            (Some(f), _) => f.y,
            (None, Target::Point(y)) => y,
            (None, Target::Boundary(t)) => mesh.curve.position(t),
            (None, Target::Node(i)) => mesh.nodes[i],
        };
        let mut sum = 0.0;
        for i in 0..mesh.len() {
            let fac = match &frame {
                Some(f) => self.far_factor(f, i),
                None => 1.0,
            };
            if fac == 0.0 {
                continue;
            }
            let k = kernel_triple(mesh.nodes[i] - y);
            let cw = c.nodes[i];
            sum += fac * mesh.weights[i] * (k[0] * cw[0] + k[1] * cw[1] + k[2] * cw[2]);
        }
        if let Some(f) = frame {
            for pn in self.polar_nodes(&f) {
                let k = kernel_triple(pn.x - y);
                let cw = c.at(pn.x);
                sum += pn.w * (k[0] * cw[0] + k[1] * cw[1] + k[2] * cw[2]);
            }
        }
        sum
    }
}

/// Newtonian potential `∫ P(x - y) f(x) dx` over the mesh region.
pub fn newtonian_potential(quad: &VolumeQuadrature, f: impl Fn(Vec2) -> f64 + Sync, target: Target) -> f64 {
    let w = Weighting::new(&quad.mesh, |x| [f(x), 0.0, 0.0]);
    quad.apply(target, &w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CurveParametrization, MeshOptions};

    /// `∫_{1<|x|<R} log|x - y| / (2pi) dx` for `|y| = r`.
    fn annulus_potential(r: f64, big_r: f64) -> f64 {
        let prim = |p: f64| 0.5 * p * p * p.ln() - 0.25 * p * p;
        if r <= 1.0 {
            prim(big_r) - prim(1.0)
        } else {
            r.ln() * (r * r - 1.0) / 2.0 + prim(big_r) - prim(r)
        }
    }

    fn annulus_potential_dr(r: f64) -> f64 {
        // d/dr of the above for 1 < r < R
        (r * r - 1.0) / (2.0 * r)
    }

    fn circle_mesh(h: f64) -> DomainMesh {
        DomainMesh::new(&CurveParametrization::unit_circle(), &MeshOptions::new(2.0, h)).unwrap()
    }

    #[test]
    fn bump_is_partition() {
        assert_eq!(bump(0.0), 1.0);
        assert_eq!(bump(1.0), 0.0);
        assert!((bump(0.5) - (2.0 * (-2.0f64).exp() / -0.5).exp()).abs() < 1e-15);
        let mut prev = 1.0;
        for k in 1..100 {
            let v = bump(k as f64 / 100.0);
            assert!(v <= prev);
            prev = v;
        }
    }

    #[test]
    fn annulus_value_at_origin() {
        let q = VolumeQuadrature::new(&circle_mesh(0.05), VolumeOptions::default());
        let v = newtonian_potential(&q, |_| 1.0, Target::Point(Vec2::ZERO));
        assert!((v - (2.0 * 2f64.ln() - 0.75)).abs() < 1e-10, "{v}");
    }

    #[test]
    fn annulus_value_on_and_off_boundary() {
        let q = VolumeQuadrature::new(&circle_mesh(0.05), VolumeOptions::default());
        for &(r, th) in &[(1.0, 0.3), (1.0005, 1.0), (1.01, 0.0), (1.3, 2.0), (1.97, 0.1), (2.0, 0.5)] {
            let target = if r == 1.0 { Target::Boundary(th) } else { Target::Point(Vec2::polar(r, th)) };
            let v = newtonian_potential(&q, |_| 1.0, target);
            let exact = annulus_potential(r, 2.0);
            assert!((v - exact).abs() < 1e-7, "r={r}: {v} vs {exact} ({:e})", v - exact);
        }
        for i in [0usize, 5, q.mesh.nt + 3, q.mesh.len() - 1] {
            let r = q.mesh.nodes[i].norm();
            let v = newtonian_potential(&q, |_| 1.0, Target::Node(i));
            assert!((v - annulus_potential(r, 2.0)).abs() < 1e-7, "node {i}");
        }
    }

    #[test]
    fn annulus_gradient() {
        let q = VolumeQuadrature::new(&circle_mesh(0.05), VolumeOptions::default());
        for &(r, th) in &[(1.0, 0.3), (1.02, 1.0), (1.5, 2.0)] {
            let y = Vec2::polar(r, th);
            let target = if r == 1.0 { Target::Boundary(th) } else { Target::Point(y) };
            let gx = q.apply(target, &Weighting::new(&q.mesh, |_| [0.0, 1.0, 0.0]));
            let gy = q.apply(target, &Weighting::new(&q.mesh, |_| [0.0, 0.0, 1.0]));
            let exact = y * (annulus_potential_dr(r) / r);
            assert!((gx - exact.x).abs() < 5e-7 && (gy - exact.y).abs() < 5e-7, "r={r}: ({gx}, {gy}) vs {exact:?}");
        }
    }

    #[test]
    fn row_reproduces_apply_for_smooth_density() {
        let curve = CurveParametrization::ellipse(1.3, 1.0).unwrap();
        let mesh = DomainMesh::new(&curve, &MeshOptions::new(2.5, 0.12)).unwrap();
        let q = VolumeQuadrature::new(&mesh, VolumeOptions::default());
        let g = |x: Vec2| (0.3 * x.x).sin() + x.y * x.y / (1.0 + x.norm_sq());
        let gv = mesh.sample(g);
        let c = |x: Vec2| [1.0, 0.5 * x.y, -0.2];
        let wc = Weighting::new(&mesh, c);
        let wcg = Weighting::new(&mesh, move |x| {
            let v = c(x);
            let gx = g(x);
            [v[0] * gx, v[1] * gx, v[2] * gx]
        });
        for target in [Target::Node(3), Target::Node(mesh.nt * 5 + 11), Target::Boundary(0.7), Target::Point(Vec2::new(0.3, 1.6))] {
            let row = q.row(target, &wc);
            let via_row: f64 = row.iter().zip(&gv).map(|(a, b)| a * b).sum();
            let direct = q.apply(target, &wcg);
            assert!((via_row - direct).abs() < 1e-7, "{target:?}: {via_row} vs {direct}");
        }
    }

    #[test]
    fn fourier_mode_potential() {
        // For g = cos(theta) on 1<r<2: P g(r,θ) = -cos θ/2 [ r^-1 ∫_1^r ρ² dρ + r ∫_r^2 dρ ]
        let q = VolumeQuadrature::new(&circle_mesh(0.05), VolumeOptions::default());
        let exact = |r: f64, th: f64| -0.5 * th.cos() * ((r * r * r - 1.0) / (3.0 * r) + r * (2.0 - r));
        for &(r, th) in &[(1.0, 0.4), (1.001, 2.0), (1.2, 0.0), (1.9, 3.0)] {
            let target = if r == 1.0 { Target::Boundary(th) } else { Target::Point(Vec2::polar(r, th)) };
            let v = newtonian_potential(&q, |x| x.x / x.norm(), target);
            assert!((v - exact(r, th)).abs() < 1e-7, "r={r}: {v} vs {}", exact(r, th));
        }
    }
}
