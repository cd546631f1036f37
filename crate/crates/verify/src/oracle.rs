//! Reference values computed independently of the simulator's own numerics.

use std::f64::consts::{FRAC_PI_2, PI};

/// Double-exponential (tanh-sinh) quadrature on `[a, b]`.
///
/// The integrand receives the abscissa and its distances to both endpoints,
/// so that endpoint singularities can be evaluated without cancellation.
pub fn tanh_sinh<F: Fn(f64, f64, f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let eval = |u: f64| -> f64 {
        let v = FRAC_PI_2 * u.sinh();
        // 1 - tanh|v| without cancellation.
        let e = (-2.0 * v.abs()).exp();
        let small = half * 2.0 * e / (1.0 + e);
        let (to_a, to_b) = if v >= 0.0 {
            (2.0 * half - small, small)
        } else {
            (small, 2.0 * half - small)
        };
        let weight = half * FRAC_PI_2 * u.cosh() / v.cosh().powi(2);
        if to_a <= 0.0 || to_b <= 0.0 || weight == 0.0 || !weight.is_finite() {
            return 0.0;
        }
        weight * f(mid + half * v.tanh(), to_a, to_b)
    };
    let mut h = 1.0;
    let umax = 6.0;
    let mut sum = eval(0.0);
    let mut k = 1;
    while k as f64 * h <= umax {
        sum += eval(k as f64 * h) + eval(-(k as f64) * h);
        k += 1;
    }
    let mut estimate = sum * h;
    for _ in 0..12 {
        h *= 0.5;
        let mut k = 1;
        while k as f64 * h <= umax {
            sum += eval(k as f64 * h) + eval(-(k as f64) * h);
            k += 2;
        }
        let next = sum * h;
        if (next - estimate).abs() < tol * next.abs() {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// Lifespan of a geodesic sphere under a speed with `F(x, ..., x) = n x^p`,
/// `0 < p < 1`: `int_0^{pi/2} tan(r)^p dr / n`.
pub fn power_speed_lifespan(n: usize, p: f64) -> f64 {
    PI / (2.0 * n as f64 * (p * FRAC_PI_2).cos())
}
