//! Uniform age grid and composite quadrature.

/// Uniform grid on [0, a_max] with n points, step da = a_max / (n - 1).
#[derive(Debug, Clone, PartialEq)]
pub struct AgeGrid {
    pub a_max: f64,
    pub n: usize,
    pub da: f64,
}

impl AgeGrid {
    pub fn new(a_max: f64, n: usize) -> Self {
        assert!(n >= 2 && a_max > 0.0);
        AgeGrid {
            a_max,
            n,
            da: a_max / (n - 1) as f64,
        }
    }

    pub fn point(&self, i: usize) -> f64 {
        i as f64 * self.da
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.point(i))
    }

    /// Samples a scalar function on the grid.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.points().map(f).collect()
    }
}

/// Composite trapezoid of sampled values.
pub fn trapezoid(vals: &[f64], da: f64) -> f64 {
    let n = vals.len();
    if n < 2 {
        return 0.0;
    }
    let interior: f64 = vals[1..n - 1].iter().sum();
    da * (0.5 * (vals[0] + vals[n - 1]) + interior)
}

/// Trapezoid of a pointwise product.
pub fn trapezoid_product(a: &[f64], b: &[f64], da: f64) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let mut s = 0.5 * (a[0] * b[0] + a[n - 1] * b[n - 1]);
    for i in 1..n - 1 {
        s += a[i] * b[i];
    }
    da * s
}

/// Trapezoid with the Euler-Maclaurin endpoint correction
/// `-da^2/12 * (g'(b) - g'(a))`, which lifts the order from O(da^2) to
/// O(da^4) for smooth integrands. Endpoint derivatives must be exact.
pub fn trapezoid_corrected(vals: &[f64], da: f64, d_start: f64, d_end: f64) -> f64 {
    trapezoid(vals, da) - da * da / 12.0 * (d_end - d_start)
}

/// Adaptive composite Simpson on [a, b] to absolute tolerance `tol`.
pub fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    fn recurse(
        f: &impl Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, b - a);
    recurse(&f, a, b, fa, fm, fb, whole, tol, 48)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn corrected_trapezoid_beats_plain_on_exponential() {
        let g = AgeGrid::new(10.0, 1001);
        let c = 2.0;
        let vals = g.sample(|a| (-c * a).exp());
        let exact = (1.0 - (-c * g.a_max).exp()) / c;
        let plain = trapezoid(&vals, g.da);
        let corr = trapezoid_corrected(&vals, g.da, -c, -c * (-c * g.a_max).exp());
        assert!((corr - exact).abs() < 1e-3 * (plain - exact).abs());
        // Residual error is the next Euler-Maclaurin term, ~1e-10 here.
        assert_relative_eq!(corr, exact, max_relative = 1e-9);
    }

    #[test]
    fn adaptive_simpson_smooth() {
        let v = adaptive_simpson(&|x: f64| x.sin(), 0.0, std::f64::consts::PI, 1e-12);
        assert_relative_eq!(v, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn simpson_empty_interval_is_zero() {
        assert_eq!(adaptive_simpson(&|x: f64| x * x, 1.0, 1.0, 1e-10), 0.0);
    }
}
