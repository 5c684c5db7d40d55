//! Piecewise quintic Hermite interpolation of leaf tables.

/// `f'(x_i)` at every node from the five-point Lagrange stencil nearest to
/// it (one-sided at the ends). Works on non-uniform grids.
pub(crate) fn node_derivatives(x: &[f64], f: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(2).min(n.saturating_sub(5));
            let idx = lo..(lo + 5).min(n);
            lagrange_derivative(&x[idx.clone()], &f[idx], x[i])
        })
        .collect()
}

/// Derivative at `xc` of the polynomial interpolating `(xs, fs)`.
fn lagrange_derivative(xs: &[f64], fs: &[f64], xc: f64) -> f64 {
    let m = xs.len();
    let mut d = 0.0;
    for j in 0..m {
        let mut wj = 0.0;
        for a in 0..m {
            if a == j {
                continue;
            }
            let mut term = 1.0 / (xs[j] - xs[a]);
            for b in 0..m {
                if b != j && b != a {
                    term *= (xc - xs[b]) / (xs[j] - xs[b]);
                }
            }
            wj += term;
        }
        d += wj * fs[j];
    }
    d
}

/// Value, first and second derivative at `x` of the quintic matching
/// `(y, y', y'')` at both ends of `[t0, t1]`.
pub(crate) fn quintic(t: [f64; 2], y: [f64; 2], d: [f64; 2], dd: [f64; 2], x: f64) -> [f64; 3] {
    let h = t[1] - t[0];
    let s = (x - t[0]) / h;
    let c0 = y[0];
    let c1 = h * d[0];
    let c2 = 0.5 * h * h * dd[0];
    let a = y[1] - (c0 + c1 + c2);
    let b = h * d[1] - (c1 + 2.0 * c2);
    let c = h * h * dd[1] - 2.0 * c2;
    let c3 = 10.0 * a - 4.0 * b + 0.5 * c;
    let c4 = -15.0 * a + 7.0 * b - c;
    let c5 = 6.0 * a - 3.0 * b + 0.5 * c;
    let v = c0 + s * (c1 + s * (c2 + s * (c3 + s * (c4 + s * c5))));
    let dv = c1 + s * (2.0 * c2 + s * (3.0 * c3 + s * (4.0 * c4 + s * 5.0 * c5)));
    let ddv = 2.0 * c2 + s * (6.0 * c3 + s * (12.0 * c4 + s * 20.0 * c5));
    [v, dv / h, ddv / (h * h)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quintic_is_exact_on_quintics() {
        let p = |x: f64| [
            1.0 - x + 0.5 * x.powi(3) + 0.25 * x.powi(5),
            -1.0 + 1.5 * x * x + 1.25 * x.powi(4),
            3.0 * x + 5.0 * x.powi(3),
        ];
        let (a, b) = (0.3, 1.1);
        let (pa, pb) = (p(a), p(b));
        for &x in &[0.3, 0.5, 0.77, 1.1] {
            let q = quintic([a, b], [pa[0], pb[0]], [pa[1], pb[1]], [pa[2], pb[2]], x);
            let e = p(x);
            for i in 0..3 {
                assert!((q[i] - e[i]).abs() < 1e-12, "{x} {i}");
            }
        }
    }

    #[test]
    fn five_point_derivative_is_exact_on_quartics() {
        let x: Vec<f64> = [0.0, 0.1, 0.15, 0.4, 0.5, 0.9, 1.0].to_vec();
        let f: Vec<f64> = x.iter().map(|t| t.powi(4) - 2.0 * t).collect();
        let d = node_derivatives(&x, &f);
        for (t, di) in x.iter().zip(&d) {
            assert!((di - (4.0 * t.powi(3) - 2.0)).abs() < 1e-12);
        }
    }
}
