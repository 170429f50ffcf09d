use bdie_core::coefficient::CoefficientField;
use bdie_core::geometry::{BoundaryGrid, CurveParametrization, DomainMesh, MeshOptions};
use bdie_core::laplace::{matvec, LayerPotentials};
use bdie_core::parametrix::{layer_v, layer_w, remainder_r, trace_remainder, BoundaryOperators};
use bdie_core::quadrature::gauss_legendre_on;
use bdie_core::volume::{Target, VolumeOptions, VolumeQuadrature};
use bdie_core::Vec2;
use std::f64::consts::PI;

fn densities(grid: &BoundaryGrid) -> Vec<(&'static str, Vec<f64>)> {
    vec![
        ("1", vec![1.0; grid.len()]),
        ("cos", grid.t.iter().map(|t| t.cos()).collect()),
        ("sin2", grid.t.iter().map(|t| (2.0 * t).sin()).collect()),
    ]
}

/// Limit as eps -> 0 from samples at eps, eps/2, eps/4 (second-order Richardson).
fn richardson(f: impl Fn(f64) -> f64, eps: f64) -> f64 {
    let (f1, f2, f4) = (f(eps), f(eps / 2.0), f(eps / 4.0));
    (8.0 * f4 - 6.0 * f2 + f1) / 3.0
}

#[test]
fn jump_relations_for_gaussian_bump() {
    let field = CoefficientField::gaussian_bump(1.0, 1.0, Vec2::ZERO).unwrap();
    for curve in [CurveParametrization::unit_circle(), CurveParametrization::ellipse(1.5, 1.0).unwrap()] {
        let grid = BoundaryGrid::new(&curve, 128).unwrap();
        let ops = BoundaryOperators::new(&grid, &field).unwrap();
        let lp = LayerPotentials::new(&grid).unwrap();
        let mut worst: f64 = 0.0;
        for (name, rho) in densities(&grid) {
            let v_direct = ops.boundary_v(&rho);
            let w_direct = ops.boundary_w(&rho);
            for i in (0..128).step_by(9) {
                let x = grid.points[i];
                let n = grid.normals[i];
                for side in [1.0, -1.0] {
                    // side = +1: exterior (against the normal)
                    let at = |e: f64| x - n * (side * e);
                    let v = richardson(|e| layer_v(&lp, &rho, &ops.coeff, at(e)), 0.01);
                    let w = richardson(|e| layer_w(&lp, &rho, &ops.coeff, at(e)), 0.01);
                    let ev = (v - v_direct[i]).abs();
                    let ew = (w - (-side * 0.5 * rho[i] + w_direct[i])).abs();
                    assert!(ev <= 1e-6, "V {name} side {side} node {i}: {ev:e}");
                    assert!(ew <= 1e-6, "W {name} side {side} node {i}: {ew:e}");
                    worst = worst.max(ev).max(ew);
                }
            }
        }
        assert!(worst < 1e-6);
    }
}

#[test]
fn hypersingular_is_minus_normal_derivative_of_double_layer() {
    // T_Δ W_Δ computed by one-sided differences equals -H.
    let curve = CurveParametrization::ellipse(1.4, 1.0).unwrap();
    let grid = BoundaryGrid::new(&curve, 128).unwrap();
    let ops = BoundaryOperators::new(&grid, &CoefficientField::constant(1.0).unwrap()).unwrap();
    let lp = LayerPotentials::new(&grid).unwrap();
    let tau: Vec<f64> = grid.t.iter().map(|t| (2.0 * t).cos() + 0.5 * t.sin()).collect();
    let h = matvec(&ops.hyper_delta, &tau);
    for i in [0usize, 21, 64, 99] {
        let x = grid.points[i];
        let n = grid.normals[i];
        // g(e) = W(x - e n); n·grad W at the boundary is -g'(0)
        let e0 = 0.01;
        let g: Vec<f64> = (0..5).map(|k| lp.double_layer(x - n * (e0 * k as f64), &tau)).collect();
        let g = {
            let mut g = g;
            g[0] = -0.5 * tau[i] + matvec(&ops.w_delta, &tau)[i];
            g
        };
        // fourth-order one-sided derivative at 0
        let d = (-25.0 * g[0] + 48.0 * g[1] - 36.0 * g[2] + 16.0 * g[3] - 3.0 * g[4]) / (12.0 * e0);
        let tw = -d;
        assert!((tw + h[i]).abs() < 1e-5, "node {i}: T W = {tw}, H = {}", h[i]);
    }
}

struct Density;
impl Density {
    fn value(x: Vec2) -> f64 {
        x.x / x.norm_sq() + 0.5 * x.y * (-0.25 * x.norm_sq()).exp()
    }
    fn gradient(x: Vec2) -> Vec2 {
        let r2 = x.norm_sq();
        let e = (-0.25 * r2).exp();
        let g1 = Vec2::new((x.y * x.y - x.x * x.x) / (r2 * r2), -2.0 * x.x * x.y / (r2 * r2));
        let g2 = Vec2::new(-0.25 * x.x * x.y * e, 0.5 * e - 0.25 * x.y * x.y * e);
        g1 + g2
    }
}

/// Weak form of the remainder on the annulus 1 < |x| < R with an
/// independent polar rule centred at y:
/// `ℛ rho(y) = ∫ P_Δ grad ln a · grad rho dx + V_Δ(rho ∂_n ln a)(y)`.
fn weak_form_oracle(field: &CoefficientField, y: Vec2, big_r: f64) -> f64 {
    let integrand = |x: Vec2| field.grad_log(x).dot(Density::gradient(x));
    let ry = y.norm();
    // tangency directions of rays from y to the unit circle
    let breaks = if ry > 1.0 + 1e-14 {
        let base = (-y).angle();
        let half = (1.0 / ry).asin();
        [base - half, base + half]
    } else {
        let base = y.angle();
        [base + 0.5 * PI, base + 1.5 * PI]
    };
    let arcs = [(breaks[0], breaks[1]), (breaks[1], breaks[0] + 2.0 * PI)];
    let (ua, wa) = gauss_legendre_on(160, 0.0, 1.0);
    let (tau, wt) = gauss_legendre_on(48, 0.0, 1.0);
    let mut vol = 0.0;
    for (pa, pb) in arcs {
        for (&u, &wu) in ua.iter().zip(&wa) {
            // cosine clustering smooths the square-root behaviour at tangency
            let phi = pa + (pb - pa) * 0.5 * (1.0 - (PI * u).cos());
            let dphi = (pb - pa) * 0.5 * PI * (PI * u).sin() * wu;
            let e = Vec2::polar(1.0, phi);
            let b = y.dot(e);
            let r_out = -b + (b * b - ry * ry + big_r * big_r).sqrt();
            let disc = b * b - ry * ry + 1.0;
            let mut segs = Vec::new();
            if disc > 0.0 && -b - disc.sqrt() > -1e-14 {
                let r1 = (-b - disc.sqrt()).max(0.0);
                let r2 = -b + disc.sqrt();
                if r1 > 0.0 {
                    segs.push((0.0, r1));
                }
                segs.push((r2, r_out));
            } else {
                segs.push((0.0, r_out));
            }
            for (s0, s1) in segs {
                let len = s1 - s0;
                for (&tk, &wk) in tau.iter().zip(&wt) {
                    let (rho, jac) = if s0 == 0.0 { (len * tk * tk, 2.0 * len * tk) } else { (s0 + len * tk, len) };
                    if rho == 0.0 {
                        continue;
                    }
                    let x = y + e * rho;
                    vol += dphi * wk * jac * rho * (rho.ln() / (2.0 * PI)) * integrand(x);
                }
            }
        }
    }
    let grid = BoundaryGrid::new(&CurveParametrization::unit_circle(), 256).unwrap();
    let ops = BoundaryOperators::new(&grid, field).unwrap();
    let g: Vec<f64> = grid.points.iter().zip(&ops.coeff.dlog_dn).map(|(&p, d)| Density::value(p) * d).collect();
    let bnd = if ry > 1.0 + 1e-14 {
        LayerPotentials::new(&grid).unwrap().single_layer(y, &g)
    } else {
        // y is the grid node at angle 0
        matvec(&ops.v_delta, &g)[0]
    };
    vol + bnd
}

#[test]
fn remainder_matches_weak_form_oracle() {
    let field = CoefficientField::gaussian_bump(1.0, 1.0, Vec2::ZERO).unwrap();
    let big_r = 5.5;
    let mesh = DomainMesh::new(&CurveParametrization::unit_circle(), &MeshOptions::new(big_r, 0.06)).unwrap();
    let quad = VolumeQuadrature::new(&mesh, VolumeOptions::default());
    let rho = mesh.sample(Density::value);
    for (target, y) in [
        (Target::Point(Vec2::new(1.6, 0.7)), Vec2::new(1.6, 0.7)),
        (Target::Point(Vec2::new(-0.2, 1.05)), Vec2::new(-0.2, 1.05)),
        (Target::Point(Vec2::new(0.0, -2.5)), Vec2::new(0.0, -2.5)),
        (Target::Boundary(0.0), Vec2::new(1.0, 0.0)),
    ] {
        let got = remainder_r(&quad, &rho, &field, target);
        let oracle = weak_form_oracle(&field, y, big_r);
        assert!((got - oracle).abs() < 1e-6, "{target:?}: {got} vs {oracle} ({:e})", got - oracle);
    }
}

#[test]
fn trace_remainder_self_converges_and_vanishes_for_constants() {
    let curve = CurveParametrization::ellipse(1.3, 1.0).unwrap();
    let field = CoefficientField::gaussian_bump(0.8, 1.0, Vec2::new(0.2, 0.0)).unwrap();
    let grid = BoundaryGrid::new(&curve, 32).unwrap();
    let run = |h: f64| {
        let mesh = DomainMesh::new(&curve, &MeshOptions::new(5.0, h)).unwrap();
        let quad = VolumeQuadrature::new(&mesh, VolumeOptions::default());
        trace_remainder(&quad, &mesh.sample(Density::value), &field, &grid)
    };
    let (a, b, c) = (run(0.2), run(0.1), run(0.05));
    let d1 = a.iter().zip(&c).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let d2 = b.iter().zip(&c).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(d2 < d1 && d2 < 1e-5, "{d1:e} {d2:e}");
    let mesh = DomainMesh::new(&curve, &MeshOptions::new(3.0, 0.2)).unwrap();
    let quad = VolumeQuadrature::new(&mesh, VolumeOptions::default());
    let zero = trace_remainder(&quad, &mesh.sample(Density::value), &CoefficientField::constant(3.0).unwrap(), &grid);
    assert!(zero.iter().all(|v| *v == 0.0));
    // linearity
    let rho = mesh.sample(Density::value);
    let rho2: Vec<f64> = rho.iter().map(|v| 2.5 * v).collect();
    let r1 = remainder_r(&quad, &rho, &field, Target::Node(40));
    let r2 = remainder_r(&quad, &rho2, &field, Target::Node(40));
    assert!((r2 - 2.5 * r1).abs() < 1e-14 * r1.abs().max(1.0));
}

#[test]
fn off_boundary_single_layer_examples() {
    let grid = BoundaryGrid::new(&CurveParametrization::unit_circle(), 128).unwrap();
    let lp = LayerPotentials::new(&grid).unwrap();
    let ones = vec![1.0; 128];
    assert!((lp.single_layer(Vec2::new(2.0, 0.0), &ones) + 2f64.ln()).abs() < 1e-12);
    assert!(lp.double_layer(Vec2::new(2.0, 0.0), &ones).abs() < 1e-12);
    assert!((lp.double_layer(Vec2::ZERO, &ones) - 1.0).abs() < 1e-12);
    // mean-zero density: decay at infinity
    let rho: Vec<f64> = grid.t.iter().map(|t| t.cos() + 0.3 * (3.0 * t).sin()).collect();
    let v10 = lp.single_layer(Vec2::new(10.0, 3.0), &rho).abs();
    let v100 = lp.single_layer(Vec2::new(100.0, 30.0), &rho).abs();
    assert!(v100 < v10 && v100 < 1e-2);
}
