//! Small numerical toolbox: adaptive quadrature, finite-difference
//! weights on arbitrary nodes, least-squares line fits, and 1-D scalar
//! optimization. Shared by the closed-form oracles and the diagnostics.

/// Adaptive Simpson quadrature of `f` on `[a, b]`.
///
/// Recursion stops when the local Richardson error estimate is below the
/// mixed tolerance `atol + rtol * |whole|`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, atol: f64, rtol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
    }
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        m: f64,
        fm: f64,
        whole: f64,
        atol: f64,
        rtol: f64,
        depth: u32,
    ) -> f64 {
        let (lm, flm, left) = simpson(f, a, fa, m, fm);
        let (rm, frm, right) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * (atol + rtol * whole.abs()) {
            return left + right + delta / 15.0;
        }
        rec(f, a, fa, m, fm, lm, flm, left, atol / 2.0, rtol, depth - 1)
            + rec(f, m, fm, b, fb, rm, frm, right, atol / 2.0, rtol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let (m, fm, whole) = simpson(f, a, fa, b, fb);
    rec(f, a, fa, b, fb, m, fm, whole, atol, rtol, 48)
}

/// Quadrature of `f` over `[a, ∞)` via the substitution r = a + s/(1-s).
///
/// `f` must decay integrably. Tolerances as in [`adaptive_simpson`].
pub fn adaptive_simpson_to_inf<F: Fn(f64) -> f64>(f: &F, a: f64, atol: f64, rtol: f64) -> f64 {
    let g = |s: f64| {
        if s >= 1.0 {
            return 0.0;
        }
        let r = a + s / (1.0 - s);
        let jac = 1.0 / ((1.0 - s) * (1.0 - s));
        f(r) * jac
    };
    adaptive_simpson(&g, 0.0, 1.0, atol, rtol)
}

/// Weighted radial integral ∫_a^b f(r) r^{d-1-γ} dr, times the sphere
/// area, split across decades so the adaptive rule sees power-law pieces
/// at unit scale.
pub fn weighted_radial_integral<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    dim_gamma: f64,
    sphere_area: f64,
    rtol: f64,
) -> f64 {
    assert!(a >= 0.0 && b > a);
    let g = |r: f64| f(r) * r.powf(dim_gamma - 1.0);
    let mut total = 0.0;
    let mut lo = a;
    // inner segment up to max(a, tiny) handled by the first decade split
    let first = if lo == 0.0 { (b / 1e12).min(1e-12).clamp(1e-300, f64::MAX) } else { lo };
    if lo == 0.0 {
        total += adaptive_simpson(&g, 0.0, first, 0.0, rtol * 1e-3);
        lo = first;
    }
    while lo < b {
        let hi = (lo * 10.0).min(b);
        total += adaptive_simpson(&g, lo, hi, 0.0, rtol);
        lo = hi;
    }
    sphere_area * total
}

/// Finite-difference weights for the `order`-th derivative at `x0` given
/// arbitrary distinct nodes `xs` (Fornberg's algorithm).
pub fn fd_weights(x0: f64, xs: &[f64], order: usize) -> Vec<f64> {
    let n = xs.len();
    assert!(n > order);
    let mut c = vec![vec![0.0; order + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    (0..n).map(|i| c[i][order]).collect()
}

/// Least-squares line `y = slope * x + intercept`.
///
/// Returns `(slope, intercept, max |y_i - fit(x_i)|)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points for a line fit");
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let resid = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - (slope * x + intercept)).abs())
        .fold(0.0, f64::max);
    (slope, intercept, resid)
}

/// Golden-section maximization of a unimodal `f` on `[a, b]`.
///
/// Returns `(argmax, max)` with bracket width below `xtol` (relative).
pub fn golden_max<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, xtol: f64) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_8;
    let (mut a, mut b) = (a, b);
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > xtol * (a.abs() + b.abs() + 1e-300) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Golden-section minimization (see [`golden_max`]).
pub fn golden_min<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, xtol: f64) -> (f64, f64) {
    let (x, v) = golden_max(&|x| -f(x), a, b, xtol);
    (x, -v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_polynomial_and_tail() {
        let v = adaptive_simpson(&|x: f64| x * x, 0.0, 3.0, 0.0, 1e-12);
        assert_relative_eq!(v, 9.0, max_relative = 1e-12);
        let v = adaptive_simpson_to_inf(&|r: f64| (-r).exp(), 0.0, 1e-14, 1e-12);
        assert_relative_eq!(v, 1.0, max_relative = 1e-10);
        // ∫_0^∞ r^2 (1+r^2)^{-3} dr = π/16
        let v = adaptive_simpson_to_inf(&|r: f64| r * r * (1.0 + r * r).powi(-3), 0.0, 1e-14, 1e-12);
        assert_relative_eq!(v, std::f64::consts::PI / 16.0, max_relative = 1e-9);
    }

    #[test]
    fn weighted_integral_power_law() {
        // ∫_0^1 r^{-1/2} r^{2} dr * 4π with d=3, γ=1/2: f = r^{-1/2}... use f = 1:
        // ∫_0^1 r^{d-1-γ} dr = 1/(d-γ)
        let v = weighted_radial_integral(&|_| 1.0, 0.0, 1.0, 2.5, 4.0 * std::f64::consts::PI, 1e-10);
        assert_relative_eq!(v, 4.0 * std::f64::consts::PI / 2.5, max_relative = 1e-8);
    }

    #[test]
    fn fornberg_matches_central_stencil() {
        let xs: Vec<f64> = (-2..=2).map(|k| k as f64).collect();
        let w = fd_weights(0.0, &xs, 1);
        let expect = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(expect.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-13);
        }
        let w2 = fd_weights(0.0, &xs, 2);
        let expect2 = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
        for (a, b) in w2.iter().zip(expect2.iter()) {
            assert_relative_eq!(a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn line_fit_exact() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let (s, i, r) = linear_fit(&xs, &ys);
        assert_relative_eq!(s, 2.0, epsilon = 1e-12);
        assert_relative_eq!(i, 1.0, epsilon = 1e-12);
        assert!(r < 1e-12);
    }

    #[test]
    fn golden_finds_quadratic_peak() {
        let (x, v) = golden_max(&|x: f64| -(x - 1.7) * (x - 1.7) + 4.0, 0.0, 5.0, 1e-10);
        assert_relative_eq!(x, 1.7, epsilon = 1e-7);
        assert_relative_eq!(v, 4.0, epsilon = 1e-12);
    }
}
