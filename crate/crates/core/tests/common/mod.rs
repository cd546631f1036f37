#![allow(dead_code)]

//! Brute-force geometry on embedded points, independent of the graph formulas.

pub type V3 = [f64; 3];

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn cross(a: &V3, b: &V3) -> V3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Point of S^2 at polar angle `rho` from `(0, 0, 1)` and azimuth `theta`.
pub fn sphere_point(rho: f64, theta: f64) -> V3 {
    let (s, c) = rho.sin_cos();
    [s * theta.cos(), s * theta.sin(), c]
}

/// Geodesic curvature of `theta -> sphere_point(rho(theta), theta)` from
/// central differences of the embedding; positive for circles about the pole.
pub fn embedded_geodesic_curvature(rho: &dyn Fn(f64) -> f64, theta: f64) -> f64 {
    let h = 2e-3;
    let p = |t: f64| sphere_point(rho(t), t);
    let (m2, m1, x0, p1, p2) = (p(theta - 2.0 * h), p(theta - h), p(theta), p(theta + h), p(theta + 2.0 * h));
    let d1: V3 = std::array::from_fn(|i| (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * h));
    let d2: V3 =
        std::array::from_fn(|i| (-m2[i] + 16.0 * m1[i] - 30.0 * x0[i] + 16.0 * p1[i] - p2[i]) / (12.0 * h * h));
    dot(&d2, &cross(&x0, &d1)) / norm(&d1).powi(3)
}
