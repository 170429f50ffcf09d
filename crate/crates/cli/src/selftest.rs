//! Fixed-size oracle checks of the kernels, the Gauss identities and the jump relations.

use bdie_core::coefficient::CoefficientField;
use bdie_core::geometry::{BoundaryGrid, CurveParametrization};
use bdie_core::laplace::{
    double_layer_matrix, hypersingular_matrix, matvec, single_layer_matrix, LayerPotentials,
};
use bdie_core::parametrix::{layer_v, layer_w, BoundaryOperators};
use bdie_core::Vec2;
use serde::Serialize;

#[derive(Debug, Clone, Default)]
pub struct SelftestOptions {
    /// Negative control: reverse every boundary normal.
    pub flip_normals: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestRow {
    pub check: String,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelftestReport {
    pub flip_normals: bool,
    pub rows: Vec<SelftestRow>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn lines(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| format!("{:<40} {:>10.3e} <= {:<8.1e} {}", r.check, r.error, r.tolerance, if r.pass { "ok" } else { "FAIL" }))
            .collect()
    }

    pub fn write_csv(&self, out: impl std::io::Write) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["check", "error", "tolerance", "pass"])?;
        for r in &self.rows {
            w.write_record([r.check.clone(), format!("{:.6e}", r.error), format!("{:.1e}", r.tolerance), r.pass.to_string()])?;
        }
        w.flush()
    }
}

fn max_err(a: &[f64], b: impl Fn(usize) -> f64) -> f64 {
    a.iter().enumerate().map(|(i, v)| (v - b(i)).abs()).fold(0.0, f64::max)
}

fn grid(curve: &CurveParametrization, n: usize, flip: bool) -> BoundaryGrid {
    let g = BoundaryGrid::new(curve, n).expect("built-in curve");
    if flip {
        g.with_flipped_normals()
    } else {
        g
    }
}

pub fn run_selftest(opts: &SelftestOptions) -> SelftestReport {
    let mut rows = Vec::new();
    let mut push = |check: String, error: f64, tolerance: f64| {
        rows.push(SelftestRow { check, error, tolerance, pass: error <= tolerance });
    };
    let flip = opts.flip_normals;
    let circle = CurveParametrization::unit_circle();
    let ellipse = CurveParametrization::ellipse(1.5, 1.0).expect("valid ellipse");

    let g = grid(&circle, 64, flip);
    let (v, w, h) = (single_layer_matrix(&g), double_layer_matrix(&g), hypersingular_matrix(&g));
    let (mut ev, mut ew, mut eh) = (0.0_f64, 0.0_f64, 0.0_f64);
    for n in 1..=8 {
        let nf = n as f64;
        let c: Vec<f64> = g.t.iter().map(|t| (nf * t).cos()).collect();
        ev = ev.max(max_err(&matvec(&v, &c), |i| c[i] / (2.0 * nf)));
        ew = ew.max(max_err(&matvec(&w, &c), |_| 0.0));
        eh = eh.max(max_err(&matvec(&h, &c), |i| 0.5 * nf * c[i]));
    }
    push("fourier single layer 1/(2n)".into(), ev, 1e-10);
    push("fourier double layer 0".into(), ew, 1e-10);
    push("fourier hypersingular n/2".into(), eh, 1e-10);

    for (name, curve) in [("circle", &circle), ("ellipse", &ellipse)] {
        let g = grid(curve, 64, flip);
        let lp = LayerPotentials::new(&g).expect("grid");
        let ones = vec![1.0; g.len()];
        let inner = [Vec2::new(0.1, 0.2), Vec2::new(-0.4, 0.3)];
        let outer = [Vec2::new(2.0, 1.0), Vec2::new(-0.5, 3.0)];
        let e_in = inner.iter().map(|&y| (lp.double_layer(y, &ones) - 1.0).abs()).fold(0.0, f64::max);
        let e_out = outer.iter().map(|&y| lp.double_layer(y, &ones).abs()).fold(0.0, f64::max);
        let e_on = max_err(&matvec(&double_layer_matrix(&g), &ones), |_| 0.5);
        push(format!("gauss {name} inside = 1"), e_in, 1e-10);
        push(format!("gauss {name} on S = 1/2"), e_on, 1e-10);
        push(format!("gauss {name} outside = 0"), e_out, 1e-10);
    }

    let field = CoefficientField::gaussian_bump(1.0, 1.0, Vec2::ZERO).expect("valid bump");
    let g = grid(&circle, 64, flip);
    let ops = BoundaryOperators::new(&g, &field).expect("grid");
    let lp = LayerPotentials::new(&g).expect("grid");
    let richardson = |f: &dyn Fn(f64) -> f64, eps: f64| (8.0 * f(eps / 4.0) - 6.0 * f(eps / 2.0) + f(eps)) / 3.0;
    let (mut jv, mut jw) = (0.0_f64, 0.0_f64);
    for rho in [vec![1.0; 64], g.t.iter().map(|t| t.cos()).collect(), g.t.iter().map(|t| (2.0 * t).sin()).collect::<Vec<_>>()] {
        let vd = ops.boundary_v(&rho);
        let wd = ops.boundary_w(&rho);
        for i in (0..64).step_by(7) {
            let (x, n) = (g.points[i], g.normals[i]);
            for side in [1.0, -1.0] {
                let at = |e: f64| x - n * (side * e);
                let v = richardson(&|e| layer_v(&lp, &rho, &ops.coeff, at(e)), 0.02);
                let w = richardson(&|e| layer_w(&lp, &rho, &ops.coeff, at(e)), 0.02);
                jv = jv.max((v - vd[i]).abs());
                jw = jw.max((w - (-side * 0.5 * rho[i] + wd[i])).abs());
            }
        }
    }
    push("jump single layer (gaussian bump)".into(), jv, 1e-5);
    push("jump double layer (gaussian bump)".into(), jw, 1e-5);
    SelftestReport { flip_normals: flip, rows }
}
