use std::f64::consts::{FRAC_PI_2, PI, TAU};

use proptest::prelude::*;
use sphereflow::curve_flow::RadialCurve;
use sphereflow::gnomonic::{self, AncientFamily};
use sphereflow::quantities::{
    self, backwards_limit_report, FieldHistory, Geometry, LimitVerdict, Quantity, QuantitySet,
};
use sphereflow::record::Series;
use sphereflow::spectral::DiffMode;
use sphereflow::SpeedFunction;

fn circle(r: f64, n: usize) -> RadialCurve {
    RadialCurve::from_fn(n, DiffMode::Spectral, |_| r).unwrap()
}

fn limit_set() -> QuantitySet {
    QuantitySet::new(vec![
        Quantity::C1DistanceToEquator,
        Quantity::HMax,
        Quantity::KappaMax,
        Quantity::RoundnessResidual,
    ])
}

fn series_of(curves: impl Iterator<Item = RadialCurve>) -> Series {
    let set = limit_set();
    let mut series = Series::new(set.columns(Geometry::Curve));
    let history = FieldHistory::new(1);
    for c in curves {
        series.push(quantities::eval_curve(&c, None, &set, &history));
    }
    series
}

#[test]
fn equator_has_no_turning() {
    let eq = circle(FRAC_PI_2, 64);
    assert!(quantities::total_curvature(&eq).abs() < 1e-14);
    assert!((quantities::length(&eq) - TAU).abs() < 1e-13);
    assert!((quantities::enclosed_area(&eq) - TAU).abs() < 1e-13);
    assert_eq!(quantities::c0_distance_to_equator(&eq.rho), 0.0);
}

/// Under curve shortening a geodesic circle keeps `cos r = cos r0 e^t`, so
/// with `F = cot r` one has `F_t = F (1 + F^2)` and no arclength gradient.
#[test]
fn harnack_on_a_shrinking_circle() {
    let speed = SpeedFunction::builtin("H", &[], 1).unwrap();
    let r_at = |t: f64| (0.4f64.cos() * t.exp()).acos();
    let dt = 1e-4;
    let mut history = FieldHistory::new(5);
    let mut last = None;
    for k in 0..5 {
        let t = k as f64 * dt;
        let mut c = circle(r_at(t), 64);
        c.t = t;
        assert!(quantities::harnack_min(&c, &history).is_none());
        history.push(t, quantities::speed_field(&c, &speed).unwrap());
        last = Some(c);
    }
    let c = last.unwrap();
    let k = 1.0 / r_at(4.0 * dt).tan();
    let got = quantities::harnack_min(&c, &history).unwrap();
    assert!((got - k * (1.0 + k * k)).abs() < 1e-9 * k * (1.0 + k * k), "{got}");

    // Past the equator the curvature is negative and the row is missing.
    let mut h = FieldHistory::new(2);
    h.push(0.0, vec![0.0; 64]);
    h.push(1.0, vec![0.0; 64]);
    assert!(quantities::harnack_min(&circle(FRAC_PI_2 + 0.01, 64), &h).is_none());
    assert!(quantities::harnack_min(&circle(FRAC_PI_2 - 0.01, 64), &h).is_some());
}

#[test]
fn linear_fit_recovers_a_line() {
    let x: Vec<f64> = (0..20).map(|i| i as f64 * 0.1).collect();
    let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.5 * v).collect();
    let fit = quantities::linear_fit(&x, &y);
    assert!((fit.slope + 2.5).abs() < 1e-12);
    assert!((fit.r_squared - 1.0).abs() < 1e-12);
}

#[test]
fn shrinking_circles_limit_to_a_sphere() {
    let times: Vec<f64> = (0..12).map(|k| -0.25 * k as f64).rev().collect();
    let series = series_of(times.iter().map(|&t| {
        let mut c = circle((0.3f64.cos() * t.exp()).acos(), 128);
        c.t = t;
        c
    }));
    assert_eq!(backwards_limit_report(&series).unwrap().verdict, LimitVerdict::SphereLike);
}

fn family_verdict(family: AncientFamily, times: &[f64]) -> LimitVerdict {
    let series = series_of(times.iter().map(|&t| {
        let mut c = gnomonic::to_sphere(&family.sample(t, 256, DiffMode::Spectral).unwrap()).unwrap();
        c.t = t;
        c
    }));
    backwards_limit_report(&series).unwrap().verdict
}

#[test]
fn ancient_ellipses_limit_to_the_equator() {
    let times: Vec<f64> = (0..12).rev().map(|k| -0.25 * 2f64.powi(k)).collect();
    let family = AncientFamily::ShrinkingEllipse { a: 2.0, b: 1.0 };
    assert_eq!(family_verdict(family, &times), LimitVerdict::EquatorLike);
}

#[test]
fn ancient_ovals_limit_to_a_lune() {
    // Past t = -15 the tips are narrower than the angular grid resolves.
    let times: Vec<f64> = (1..=12).rev().map(|k| -(k as f64)).collect();
    let family = AncientFamily::AngenentOval { scale: 1.0 };
    assert_eq!(family_verdict(family, &times), LimitVerdict::LuneLike);
}

proptest! {
    #[test]
    fn geodesic_circle_quantities(r in 0.05f64..(PI - 0.05)) {
        let c = circle(r, 64);
        let (s, co) = r.sin_cos();
        prop_assert!((quantities::length(&c) - TAU * s).abs() < 1e-12);
        prop_assert!((quantities::total_curvature(&c) - TAU * co).abs() < 1e-12);
        prop_assert!((quantities::enclosed_area(&c) - TAU * (1.0 - co)).abs() < 1e-12);
        prop_assert!(quantities::gauss_bonnet_residual(&c).abs() < 1e-12);
        let l = quantities::length(&c);
        let q = l * l + quantities::total_curvature(&c).powi(2);
        prop_assert!((q - 4.0 * PI * PI).abs() < 1e-10);
    }

    #[test]
    fn speed_field_is_constant_on_circles(r in 0.1f64..1.5, p in 0.2f64..2.0) {
        let c = circle(r, 32);
        let speed = SpeedFunction::builtin("H^p", &[p], 1).unwrap();
        let f = quantities::speed_field(&c, &speed).unwrap();
        let want = (1.0 / r.tan()).powf(p);
        for v in f {
            prop_assert!((v - want).abs() < 1e-12 * want.max(1.0));
        }
    }
}
