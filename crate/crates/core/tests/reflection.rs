use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI, TAU};

use proptest::prelude::*;
use sphereflow::curve_flow::{offset_circle_radius, RadialCurve};
use sphereflow::gnomonic::{to_sphere, PlanarRadialCurve};
use sphereflow::reflection::{
    self, one_sided_reflects, reflect, reflected_star_shaped, reflection_vector, AlphaOptions,
    PerturbationFamily, Point, ReflectionSetup, Shape, VGrid,
};
use sphereflow::spectral::DiffMode;

fn dot4(a: &Point, b: &Point) -> f64 {
    (0..4).map(|i| a[i] * b[i]).sum()
}

/// Curve points `(cos f cos th, cos f sin th, 0, sin f)` for heights
/// `f = pi/2 - rho`.
fn points(rho: impl Fn(f64) -> f64, m: usize) -> Vec<Point> {
    (0..m)
        .map(|i| {
            let th = TAU * i as f64 / m as f64;
            let f = FRAC_PI_2 - rho(th);
            [f.cos() * th.cos(), f.cos() * th.sin(), 0.0, f.sin()]
        })
        .collect()
}

/// Star-shapedness by counting crossings of every meridian half circle with
/// the reflected polygon; the polygon must also stay off the poles and the
/// reflected body must hold the north pole and miss the south pole.
fn brute_force_star_shaped(rho: &dyn Fn(f64) -> f64, pts: &[Point], v: &Point) -> bool {
    let inside = |x: &Point| x[3].clamp(-1.0, 1.0).acos() < rho(x[1].atan2(x[0]));
    let re = reflect(&[0.0, 0.0, 0.0, 1.0], v);
    if !inside(&re) || inside(&[-re[0], -re[1], -re[2], -re[3]]) {
        return false;
    }
    let r: Vec<Point> = pts.iter().map(|x| reflect(x, v)).collect();
    if r.iter().any(|p| p[3].abs() > 1.0 - 1e-9) {
        return false;
    }
    (0..720).all(|k| {
        let a = TAU * (k as f64 + 0.5) / 720.0;
        let (s, c) = a.sin_cos();
        let mut crossings = 0;
        for i in 0..r.len() {
            let (p, q) = (r[i], r[(i + 1) % r.len()]);
            let (sp, sq) = (-s * p[0] + c * p[1], -s * q[0] + c * q[1]);
            if (sp < 0.0) != (sq < 0.0) {
                let w = sp / (sp - sq);
                let along = c * (p[0] + w * (q[0] - p[0])) + s * (p[1] + w * (q[1] - p[1]));
                if along > 0.0 {
                    crossings += 1;
                }
            }
        }
        crossings == 1
    })
}

#[test]
fn equator_star_shapedness_examples() {
    let eq = PerturbationFamily::Circle.curve(0.0, 256).unwrap();
    let shape = Shape::from_curve(&eq);
    assert!(reflected_star_shaped(&ReflectionSetup::new(&shape, FRAC_PI_8, 0.4)));
    assert!(!reflected_star_shaped(&ReflectionSetup::new(&shape, FRAC_PI_4, 0.4)));
}

#[test]
fn star_shapedness_agrees_with_ray_counting() {
    let cases: Vec<(Box<dyn Fn(f64) -> f64>, &str)> = vec![
        (Box::new(|_| FRAC_PI_2 - 0.05), "circle"),
        (Box::new(|t| FRAC_PI_2 - 0.1 - 0.05 * (2.0 * t).cos()), "mode 2"),
        (Box::new(|t| offset_circle_radius(1.2, 0.3, t)), "offset"),
    ];
    let mut checked = 0;
    for (rho, name) in &cases {
        let c = RadialCurve::from_fn(256, DiffMode::Spectral, rho).unwrap();
        let shape = Shape::from_curve(&c);
        let pts = points(rho, 2048);
        for k in 0..24 {
            let delta = 0.05 + k as f64 * 0.03;
            for phi in [0.0, 1.0, 2.5, 4.0] {
                let v = reflection_vector(delta, phi);
                // Images grazing the pole are resolution-limited in both tests.
                if pts.iter().any(|x| reflect(x, &v)[3].abs() > 1.0 - 1e-5) {
                    continue;
                }
                // Skip angles next to a verdict change, where folds are thinner
                // than the meridian spacing.
                let want = brute_force_star_shaped(rho, &pts, &v);
                if [-0.01, 0.01].iter().any(|e| {
                    brute_force_star_shaped(rho, &pts, &reflection_vector(delta + e, phi)) != want
                }) {
                    continue;
                }
                checked += 1;
                let got = reflected_star_shaped(&ReflectionSetup::new(&shape, delta, phi));
                assert_eq!(got, want, "{name} delta={delta} phi={phi}");
            }
        }
    }
    assert!(checked > 200, "{checked}");
}

#[test]
fn centered_circle_reflects_above_itself() {
    let c = 0.05;
    let curve = PerturbationFamily::Circle.curve(c, 256).unwrap();
    let shape = Shape::from_curve(&curve);
    for phi in [0.0, 1.3, 3.0] {
        let v = reflection_vector(FRAC_PI_8, phi);
        let out = one_sided_reflects(&ReflectionSetup::new(&shape, FRAC_PI_8, phi));
        // Brute force: every reflected upper point over the lower half sits
        // at height >= c, the circle's own height in every direction.
        let mut brute = f64::INFINITY;
        for x in points(|_| FRAC_PI_2 - c, 4096) {
            if dot4(&x, &v) <= 0.0 {
                continue;
            }
            let r = reflect(&x, &v);
            let n = (r[0] * r[0] + r[1] * r[1]).sqrt();
            let y = [c.cos() * r[0] / n, c.cos() * r[1] / n, 0.0, c.sin()];
            if dot4(&y, &v) < 0.0 {
                brute = brute.min(r[3].asin() - c);
            }
        }
        assert!(brute >= 0.0);
        assert!(out.verdict, "phi={phi}");
        assert!((out.min_margin - brute).abs() < 1e-3, "{} vs {brute}", out.min_margin);
    }
}

#[test]
fn equator_reflects_with_zero_margin() {
    let eq = PerturbationFamily::Circle.curve(0.0, 128).unwrap();
    let shape = Shape::from_curve(&eq);
    for delta in [0.1, 0.4, 0.7] {
        let out = one_sided_reflects(&ReflectionSetup::new(&shape, delta, 0.9));
        assert!(out.verdict);
        assert!(out.min_margin >= 0.0 && out.min_margin < 1e-3, "{}", out.min_margin);
    }
}

#[test]
fn eccentric_curve_fails_for_small_angles() {
    let curve = RadialCurve::from_fn(256, DiffMode::Spectral, |t| offset_circle_radius(FRAC_PI_2 - 0.1, 0.4, t)).unwrap();
    let shape = Shape::from_curve(&curve);
    assert!(shape.c1_norm() > 0.4);
    let report = reflection::reflect_check(&shape, 0.1, 0.02, VGrid { deltas: 8, azimuths: 16 }).unwrap();
    assert!(!report.verdict);
    assert!(report.min_margin < 0.0);
}

#[test]
fn threshold_is_positive_and_shrinks_with_the_lower_angle() {
    let opts = AlphaOptions {
        grid: VGrid { deltas: 8, azimuths: 8 },
        resolution: 128,
        max_amplitude: 0.5,
        tolerance: 1e-2,
    };
    let family = PerturbationFamily::SingleMode { mode: 2 };
    let a16 = reflection::alpha_threshold(FRAC_PI_8, PI / 16.0, family, opts).unwrap();
    let a64 = reflection::alpha_threshold(FRAC_PI_8, PI / 64.0, family, opts).unwrap();
    assert!(a16.alpha > 0.0 && !a16.capped);
    assert!(a64.alpha < a16.alpha);

    let circle = reflection::alpha_threshold(FRAC_PI_8, PI / 16.0, PerturbationFamily::Circle, opts).unwrap();
    assert!(circle.capped);
}

#[test]
fn roundness_examples() {
    let circle = PerturbationFamily::Circle.curve(0.3, 128).unwrap();
    let r = reflection::roundness_curve(&circle);
    assert!(r.rho_spread < 1e-14 && r.best_fit_residual < 1e-12);

    let eq = PerturbationFamily::Circle.curve(0.0, 128).unwrap();
    let r = reflection::roundness_curve(&eq);
    assert_eq!(r.rho_spread, 0.0);
    assert!(r.c1_norm_of_f < 1e-14);

    let ellipse = to_sphere(&PlanarRadialCurve::ellipse(256, 2.0, 1.0, DiffMode::Spectral).unwrap()).unwrap();
    assert!(reflection::roundness_curve(&ellipse).best_fit_residual > 1e-3);

    let shifted = RadialCurve::from_fn(256, DiffMode::Spectral, |t| offset_circle_radius(0.8, 0.2, t)).unwrap();
    let r = reflection::roundness_curve(&shifted);
    assert!(r.rho_spread > 0.1 && r.best_fit_residual < 1e-6, "{r:?}");
}

/// Reflecting above itself for both `V` and `-V` as the tilt goes to zero
/// only happens for round curves.
#[test]
fn two_sided_reflection_forces_roundness() {
    let both_ways = |curve: &RadialCurve| {
        let shape = Shape::from_curve(curve);
        (0..64).all(|j| {
            let phi = TAU * j as f64 / 64.0;
            one_sided_reflects(&ReflectionSetup::new(&shape, 0.0, phi)).verdict
                && one_sided_reflects(&ReflectionSetup::new(&shape, 0.0, phi + PI)).verdict
        })
    };
    let round = PerturbationFamily::Circle.curve(0.05, 128).unwrap();
    assert!(both_ways(&round));
    assert!(reflection::roundness_curve(&round).rho_spread < 1e-12);
    let bumpy = PerturbationFamily::SingleMode { mode: 2 }.curve(0.05, 128).unwrap();
    assert!(!both_ways(&bumpy));
}

proptest! {
    #[test]
    fn reflection_is_an_involutive_isometry(
        x in proptest::array::uniform4(-2.0f64..2.0),
        y in proptest::array::uniform4(-2.0f64..2.0),
        delta in -1.5f64..1.5,
        phi in 0.0f64..TAU,
    ) {
        let v = reflection_vector(delta, phi);
        let back = reflect(&reflect(&x, &v), &v);
        for i in 0..4 {
            prop_assert!((back[i] - x[i]).abs() < 1e-14 * (1.0 + x[i].abs()) * 4.0);
        }
        let (rx, ry) = (reflect(&x, &v), reflect(&y, &v));
        prop_assert!((dot4(&rx, &ry) - dot4(&x, &y)).abs() < 1e-13 * (1.0 + dot4(&x, &x) + dot4(&y, &y)));
    }
}
