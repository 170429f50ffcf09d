//! One-dimensional rules and interpolation helpers shared by the kernels.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|&xi| mid + half * xi).collect(),
        w.iter().map(|&wi| half * wi).collect(),
    )
}

/// Lagrange basis values at `x` for the given nodes.
pub fn lagrange_basis(nodes: &[f64], x: f64, out: &mut [f64]) {
    debug_assert_eq!(nodes.len(), out.len());
    for (i, o) in out.iter_mut().enumerate() {
        let mut v = 1.0;
        for (j, &nj) in nodes.iter().enumerate() {
            if i != j {
                v *= (x - nj) / (nodes[i] - nj);
            }
        }
        *o = v;
    }
}

/// Wraps an angle into (-pi, pi].
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Periodic trigonometric interpolation basis for `n` (even) equispaced
/// nodes on [0, 2pi): value of the j-th cardinal function at offset `d = t - t_j`.
#[inline]
pub fn trig_cardinal(n: usize, d: f64) -> f64 {
    let half = 0.5 * d;
    let s = half.sin();
    if s.abs() < 1e-14 {
        // d is a multiple of 2pi.
        return 1.0;
    }
    let nf = n as f64;
    ((nf * half).sin() * half.cos() / s) / nf
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for n in 1..=20 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..(2 * n) {
                let q: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "n={n} deg={deg} q={q}");
            }
        }
    }

    #[test]
    fn trig_cardinal_is_kronecker_on_nodes() {
        let n = 16;
        let h = 2.0 * PI / n as f64;
        for k in 0..n {
            let v = trig_cardinal(n, k as f64 * h);
            let expect = if k == 0 { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-13);
        }
    }

    #[test]
    fn trig_cardinal_reproduces_low_modes() {
        let n = 16;
        let h = 2.0 * PI / n as f64;
        let t = 0.37;
        let f = |t: f64| (3.0 * t).cos() + 0.5 * (5.0 * t).sin();
        let v: f64 = (0..n).map(|j| f(j as f64 * h) * trig_cardinal(n, t - j as f64 * h)).sum();
        assert!((v - f(t)).abs() < 1e-12);
    }

    #[test]
    fn wrap_angle_range() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(-0.5) + 0.5).abs() < 1e-15);
        assert!((wrap_angle(2.0 * PI + 0.25) - 0.25).abs() < 1e-14);
    }
}
