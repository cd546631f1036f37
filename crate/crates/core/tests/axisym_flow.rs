mod common;

use std::f64::consts::FRAC_PI_4;

use common::{cross, dot, V3};
use sphereflow::axisym_flow::{self, axi_rhs, AxisymGraph, AxisymOptions, InitialAxisym};
use sphereflow::curve_flow::StopRules;
use sphereflow::quantities::{Quantity, QuantitySet};
use sphereflow::spectral::DiffMode;
use sphereflow::SpeedFunction;

fn profile(psi: f64) -> f64 {
    FRAC_PI_4 + 0.01 * psi.cos()
}

/// Principal curvatures of the hypersurface of revolution at profile angle
/// `psi`, from its embedding `(cos u, sin u cos psi, sin u sin psi cos phi,
/// sin u sin psi sin phi, ...)` at `phi = 0`. The fourth coordinate only
/// enters through the rotation, handled in closed form: `X_phi` is along it
/// with length `sin u sin psi` and `X_phiphi = -(sin u sin psi) e_3`.
fn embedded_principal(u: &dyn Fn(f64) -> f64, psi: f64) -> (f64, f64) {
    let h = 2e-3;
    let x = |p: f64| -> V3 {
        let (s, c) = u(p).sin_cos();
        [c, s * p.cos(), s * p.sin()]
    };
    let (m2, m1, x0, p1, p2) = (x(psi - 2.0 * h), x(psi - h), x(psi), x(psi + h), x(psi + 2.0 * h));
    let d1: V3 = std::array::from_fn(|i| (m2[i] - 8.0 * m1[i] + 8.0 * p1[i] - p2[i]) / (12.0 * h));
    let d2: V3 =
        std::array::from_fn(|i| (-m2[i] + 16.0 * m1[i] - 30.0 * x0[i] + 16.0 * p1[i] - p2[i]) / (12.0 * h * h));
    let mut nu = cross(&x0, &d1);
    let len = dot(&nu, &nu).sqrt();
    nu.iter_mut().for_each(|c| *c /= len);
    // Outward: along increasing distance from the pole.
    let (s, c) = u(psi).sin_cos();
    let outward: V3 = [-s, c * psi.cos(), c * psi.sin()];
    if dot(&nu, &outward) < 0.0 {
        nu.iter_mut().for_each(|c| *c = -*c);
    }
    let k1 = -dot(&d2, &nu) / dot(&d1, &d1);
    let radius = s * psi.sin();
    let k2 = radius * nu[2] / (radius * radius);
    (k1, k2)
}

#[test]
fn curvatures_match_embedded_oracle() {
    for n in [2, 3] {
        let g = AxisymGraph::from_fn(n, 256, DiffMode::Spectral, profile).unwrap();
        for j in 1..256 {
            let (k1, k2) = embedded_principal(&profile, g.psi(j));
            assert!((g.kappa1[j] - k1).abs() < 1e-5, "j={j}: {} vs {k1}", g.kappa1[j]);
            assert!((g.kappa2[j] - k2).abs() < 1e-5, "j={j}: {} vs {k2}", g.kappa2[j]);
        }
    }
}

#[test]
fn off_center_sphere_is_umbilic() {
    let g = InitialAxisym::OffsetSphere {
        radius: 0.7,
        offset: 0.3,
    }
    .build(2, 512, DiffMode::Spectral)
    .unwrap();
    let expected = 1.0 / 0.7f64.tan();
    for j in 0..=512 {
        assert!((g.kappa1[j] - expected).abs() < 1e-6);
        assert!((g.kappa2[j] - expected).abs() < 1e-6);
    }
}

#[test]
fn constant_graph_rates() {
    for n in [2usize, 3] {
        let nf = n as f64;
        for u0 in [0.4, 1.0] {
            let g = AxisymGraph::from_fn(n, 16, DiffMode::Spectral, |_| u0).unwrap();
            let cot = 1.0 / f64::tan(u0);
            for (family, params, expected) in [
                ("H", vec![], -nf * cot),
                ("norm_of_A", vec![], -nf * cot),
                // Built-ins are normalized to F(1, ..., 1) = n.
                ("H^p", vec![0.5], -nf * cot.sqrt()),
            ] {
                let f = SpeedFunction::builtin(family, &params, n).unwrap();
                for r in axi_rhs(&g, &f).unwrap() {
                    assert!((r - expected).abs() < 1e-12, "{family} n={n}: {r} vs {expected}");
                }
            }
        }
    }
}

#[test]
fn even_data_stays_even() {
    let g = AxisymGraph::from_fn(2, 64, DiffMode::Spectral, |p| 0.7 + 0.02 * (2.0 * p).cos()).unwrap();
    let stops = StopRules {
        max_time: 0.05,
        ..StopRules::default()
    };
    let run = axisym_flow::axi_run(g, &SpeedFunction::mean_curvature(2), &stops, &QuantitySet::none(), &AxisymOptions::default()).unwrap();
    let u = &run.final_state.u;
    let m = u.len() - 1;
    let asym = (0..=m).map(|j| (u[j] - u[m - j]).abs()).fold(0.0, f64::max);
    assert!(asym < 1e-10, "{asym}");
}

#[test]
fn spheres_keep_pinching_ratio() {
    let n = 3;
    let g = AxisymGraph::from_fn(n, 32, DiffMode::Spectral, |_| 1.0).unwrap();
    let f = SpeedFunction::builtin("norm_of_A", &[], n).unwrap();
    let stops = StopRules {
        max_time: 0.1,
        ..StopRules::default()
    };
    let set = QuantitySet::new(vec![Quantity::WMin, Quantity::WMax]);
    let run = axisym_flow::axi_run(g, &f, &stops, &set, &AxisymOptions::default()).unwrap();
    for col in ["w_min", "w_max"] {
        for (_, w) in run.record.series.pairs(col) {
            assert!((w - 1.0 / 3.0).abs() < 1e-10, "{col} = {w}");
        }
    }
}

/// Pinching bound direction, the curvature chain, the monotone minimum speed
/// and the H bound along one convex 1-homogeneous run.
#[test]
fn convex_speed_invariants_along_a_run() {
    let n = 2;
    let nf = n as f64;
    let g = InitialAxisym::PerturbedSphere {
        radius: 1.0,
        amplitude: 0.01,
        mode: 2,
    }
    .build(n, 64, DiffMode::Spectral)
    .unwrap();
    let f = SpeedFunction::builtin("norm_of_A", &[], n).unwrap();
    let stops = StopRules {
        max_time: 0.15,
        ..StopRules::default()
    };
    let set = QuantitySet::new(vec![Quantity::WMin, Quantity::SpeedMin, Quantity::SpeedMax, Quantity::HMax]);
    let opts = AxisymOptions {
        keep_states: true,
        ..AxisymOptions::default()
    };
    let run = axisym_flow::axi_run(g, &f, &stops, &set, &opts).unwrap();
    let series = &run.record.series;

    let w = series.pairs("w_min");
    let (s, w0) = w[0];
    let c_s = w0 - 1.0 / nf;
    assert!(c_s < 0.0);
    for &(t, wt) in &w {
        assert!(wt - 1.0 / nf - c_s * (-2.0 * nf * (t - s)).exp() >= -1e-3);
    }

    let f_min: Vec<f64> = series.pairs("F_min").iter().map(|p| p.1).collect();
    for pair in f_min.windows(2) {
        assert!(pair[1] >= pair[0] - 1e-8);
    }

    let f_end = series.pairs("F_max").last().unwrap().1;
    for (_, h) in series.pairs("H_max") {
        assert!(h <= nf / f.on_diagonal(1.0).unwrap() * f_end + 1e-8);
    }

    for state in &run.states {
        for j in 0..state.u.len() {
            let k = state.curvature_vector(j);
            let speed = f.evaluate(&k).unwrap();
            let kmin = k.iter().cloned().fold(f64::INFINITY, f64::min);
            let h: f64 = k.iter().sum();
            assert!(kmin / speed <= kmin / h * (nf / f.on_diagonal(1.0).unwrap()) + 1e-10);
            assert!(kmin / h <= 1.0 / nf + 1e-10);
        }
    }
}

#[test]
fn mean_curvature_flow_rounds_out() {
    let n = 2;
    let g = InitialAxisym::PerturbedSphere {
        radius: 1.0,
        amplitude: 0.05,
        mode: 2,
    }
    .build(n, 64, DiffMode::Spectral)
    .unwrap();
    let set = QuantitySet::new(vec![Quantity::WMin, Quantity::WMax]);
    let stops = StopRules::default();
    let run = axisym_flow::axi_run(g, &SpeedFunction::mean_curvature(n), &stops, &set, &AxisymOptions::default()).unwrap();
    let lo = run.record.series.pairs("w_min").last().unwrap().1;
    let hi = run.record.series.pairs("w_max").last().unwrap().1;
    assert!(hi - lo < 1e-4, "{lo} {hi}");
    assert!((lo - 0.5).abs() < 1e-4 && (hi - 0.5).abs() < 1e-4);
}
