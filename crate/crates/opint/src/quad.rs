//! Small quadrature toolbox: adaptive Simpson on an interval and
//! Gauss-Legendre nodes of arbitrary order (computed, not tabulated).

use crate::Real;

/// Adaptive Simpson with the classic Richardson acceptance test.
/// `tol` is absolute on the interval; depth is capped so pathological
/// integrands terminate.
pub fn adaptive_simpson<T: Real>(f: &impl Fn(T) -> T, a: T, b: T, tol: T) -> T {
    let c = (a + b) * T::of(0.5);
    let (fa, fb, fc) = (f(a), f(b), f(c));
    let whole = simpson_rule(a, b, fa, fc, fb);
    simpson_step(f, a, b, fa, fb, fc, whole, tol, 24)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<T: Real>(
    f: &impl Fn(T) -> T,
    a: T,
    b: T,
    fa: T,
    fb: T,
    fc: T,
    whole: T,
    tol: T,
    depth: usize,
) -> T {
    let c = (a + b) * T::of(0.5);
    let lm = (a + c) * T::of(0.5);
    let rm = (c + b) * T::of(0.5);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson_rule(a, c, fa, flm, fc);
    let right = simpson_rule(c, b, fc, frm, fb);
    let err = left + right - whole;
    if depth == 0 || err.abs() <= T::of(15.0) * tol {
        return left + right + err / T::of(15.0);
    }
    let half = tol * T::of(0.5);
    simpson_step(f, a, c, fa, fc, flm, left, half, depth - 1)
        + simpson_step(f, c, b, fc, fb, frm, right, half, depth - 1)
}

fn simpson_rule<T: Real>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::of(6.0) * (fa + T::of(4.0) * fm + fb)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
///
/// Newton iteration on P_n from the Chebyshev-like initial guess; converges
/// in a handful of steps for every order this crate uses.
pub fn gauss_legendre<T: Real>(order: usize) -> (Vec<T>, Vec<T>) {
    assert!(order >= 1);
    let n = order;
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    for i in 0..n.div_ceil(2) {
        let mut x = (T::PI() * (T::of(i as f64) + T::of(0.75)) / (T::of(n as f64) + T::of(0.5)))
            .cos();
        let mut dp = T::zero();
        for _ in 0..64 {
            let (p, d) = legendre(n, x);
            dp = d;
            let step = p / d;
            x -= step;
            if step.abs() <= T::epsilon() * T::of(4.0) * (T::one() + x.abs()) {
                let (p2, d2) = legendre(n, x);
                dp = d2;
                x -= p2 / d2;
                break;
            }
        }
        let w = T::of(2.0) / ((T::one() - x * x) * dp * dp);
        // Roots come out descending from the cosine guess; store ascending.
        nodes[i] = -x;
        weights[i] = w;
        nodes[n - 1 - i] = x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = T::zero();
        let (_, d) = legendre(n, T::zero());
        weights[n / 2] = T::of(2.0) / (d * d);
    }
    (nodes, weights)
}

/// (P_n(x), P_n'(x)) by the three-term recurrence.
fn legendre<T: Real>(n: usize, x: T) -> (T, T) {
    let mut p0 = T::one();
    let mut p1 = x;
    for k in 2..=n {
        let kf = T::of(k as f64);
        let p2 = ((T::of(2.0) * kf - T::one()) * x * p1 - (kf - T::one()) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (T::one(), T::zero());
    }
    let d = T::of(n as f64) * (x * p1 - p0) / (x * x - T::one());
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_integrates_polynomials() {
        let v = adaptive_simpson(&|x: f64| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 1e-12);
        assert!((v - 2.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn simpson_handles_oscillation() {
        let v =
            adaptive_simpson(&|x: f64| (10.0 * x).sin(), 0.0, std::f64::consts::FRAC_PI_2, 1e-12);
        assert!((v - 0.2).abs() < 1e-9, "{v}");
    }

    #[test]
    fn gauss_legendre_order5_matches_tables() {
        let (x, w) = gauss_legendre::<f64>(5);
        assert!((x[0] + 0.906179845938664).abs() < 1e-13);
        assert!((x[2]).abs() < 1e-15);
        assert!((w[0] - 0.236926885056189).abs() < 1e-13);
        assert!((w[2] - 0.568888888888889).abs() < 1e-13);
    }

    #[test]
    fn gauss_legendre_is_exact_to_degree_2n_minus_1() {
        let (x, w) = gauss_legendre::<f64>(32);
        for k in [0usize, 5, 17, 40, 63] {
            let num: f64 = x.iter().zip(&w).map(|(&xi, &wi)| wi * xi.powi(k as i32)).sum();
            let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
            assert!((num - exact).abs() < 1e-12, "degree {k}: {num} vs {exact}");
        }
    }

    #[test]
    fn gauss_legendre_weights_sum_to_two() {
        let (_, w) = gauss_legendre::<f64>(32);
        let s: f64 = w.iter().sum();
        assert!((s - 2.0).abs() < 1e-13);
    }
}
