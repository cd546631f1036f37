use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, FRAC_PI_8, PI};
use std::sync::{Arc, Mutex, OnceLock};

use sphereflow::axisym_flow::{self, AxisymOptions, InitialAxisym};
use sphereflow::curve_flow::{self, CurveRun, FlowSpec, InitialCurve, RadialCurve, RunOptions, StopRules};
use sphereflow::gnomonic::{self, AncientFamily, EquivalencePair, PlanarRadialCurve};
use sphereflow::quantities::{self, linear_fit, Quantity, QuantitySet};
use sphereflow::record::{Series, StopReason};
use sphereflow::reflection::{self, AlphaOptions, PerturbationFamily, ReflectionSetup, Shape, VGrid};
use sphereflow::spectral::DiffMode;
use sphereflow::sphere_ode::{self, LifespanClass};
use sphereflow::{Result, SpeedFunction};

use crate::oracle;
use crate::{Check, Criterion, Outcome, Suite};

pub static CRITERIA: &[Criterion] = &[
    Criterion { id: "c01", title: "sphere ODE closed form", budget_seconds: 1.0, run: c01 },
    Criterion { id: "c02", title: "finite lifespan", budget_seconds: 1.0, run: c02 },
    Criterion { id: "c03", title: "constant graph tracks sphere ODE", budget_seconds: 10.0, run: c03 },
    Criterion { id: "c04", title: "Gauss-Bonnet on snapshots", budget_seconds: 30.0, run: c04 },
    Criterion { id: "c05", title: "q monotone with isoperimetric floor", budget_seconds: 30.0, run: c05 },
    Criterion { id: "c06", title: "gnomonic equivalence", budget_seconds: 60.0, run: c06 },
    Criterion { id: "c07", title: "oval calibration and lune trend", budget_seconds: 60.0, run: c07 },
    Criterion { id: "c08", title: "ellipse family tends to an equator", budget_seconds: 30.0, run: c08 },
    Criterion { id: "c09", title: "reflection suite", budget_seconds: 120.0, run: c09 },
    Criterion { id: "c10", title: "pinching decay", budget_seconds: 120.0, run: c10 },
    Criterion { id: "c11", title: "Harnack monitor", budget_seconds: 30.0, run: c11 },
    Criterion { id: "c12", title: "determinism and total wall time", budget_seconds: 1200.0, run: c12 },
];

fn guard(f: impl FnOnce(&mut Outcome) -> Result<()>) -> Outcome {
    let mut out = Outcome::default();
    if let Err(e) = f(&mut out) {
        out.error = Some(e.to_string());
    }
    out
}

fn csv(series: &Series) -> Result<Vec<u8>> {
    series.to_csv()
}

// ---------------------------------------------------------------- c01

fn c01(s: Suite) -> Outcome {
    guard(|out| {
        let bound = s.tol(1e-8);
        for n in 1..=3usize {
            let f = SpeedFunction::mean_curvature(n);
            let fwd = sphere_ode::integrate_sphere(&f, 1.0, (0.0, f64::INFINITY), 1e-10)?;
            let tc = fwd.collapse_time.unwrap_or(f64::NAN);
            let nf = n as f64;
            let err = fwd
                .samples
                .iter()
                .map(|&(t, r)| (r.cos() - (nf * (t - tc)).exp()).abs())
                .fold(0.0, f64::max);
            out.check(Check::new(&format!("n{n}_sup_error"), err, "<=", bound));
            let back = sphere_ode::integrate_sphere(&f, 1.0, (0.0, f64::NEG_INFINITY), 1e-10)?;
            out.check(Check::flag(
                &format!("n{n}_backward_infinite"),
                back.lifespan_class() == LifespanClass::Infinite && back.lifespan.value.is_none(),
            ));
            out.info(&format!("n{n}_collapse_time"), tc);
        }
        Ok(())
    })
}

// ---------------------------------------------------------------- c02

fn c02(s: Suite) -> Outcome {
    guard(|out| {
        let f = SpeedFunction::builtin("H^p", &[0.5], 1)?;
        let life = sphere_ode::lifespan(&f, 1e-10)?;
        let computed = life.value.unwrap_or(f64::NAN);
        let quad = oracle::tanh_sinh(
            |r, _, to_b| {
                // cot r = tan(pi/2 - r), taken from the endpoint distance near pi/2.
                let c = if r < FRAC_PI_4 { 1.0 / r.tan() } else { to_b.tan() };
                1.0 / c.sqrt()
            },
            0.0,
            FRAC_PI_2,
            1e-13,
        );
        let closed = oracle::power_speed_lifespan(1, 0.5);
        out.check(Check::new("quadrature_gap", (computed - quad).abs(), "<=", s.tol(1e-6)));
        out.check(Check::new("closed_form_gap", (computed - closed).abs(), "<=", s.tol(1e-6)));
        out.check(Check::flag("classified_finite", life.class == LifespanClass::Finite));
        out.info("lifespan", computed);
        out.info("oracle_quadrature", quad);
        Ok(())
    })
}

// ---------------------------------------------------------------- c03

fn circle_series_set() -> QuantitySet {
    QuantitySet::new(vec![
        Quantity::Length,
        Quantity::TotalCurvature,
        Quantity::Q,
        Quantity::KappaMin,
        Quantity::KappaMax,
    ])
}

fn c03(s: Suite) -> Outcome {
    guard(|out| {
        let r0 = 1.0;
        let n = s.res(256);
        let f = SpeedFunction::mean_curvature(1);
        let ode = sphere_ode::integrate_sphere(&f, r0, (0.0, f64::INFINITY), 1e-12)?;
        let tc = ode.collapse_time.unwrap_or(f64::NAN);
        let mut checkpoints: Vec<f64> = (1..20).map(|k| tc * k as f64 / 20.0).collect();
        checkpoints.extend((1..=20).map(|k| tc * (1.0 - 0.5f64.powi(k))));
        let opts = RunOptions {
            checkpoints,
            cadence: 50,
            ..RunOptions::default()
        };
        let run = curve_flow::run(
            RadialCurve::circle(n, r0, DiffMode::Spectral)?,
            &FlowSpec::curve_shortening(),
            &circle_series_set(),
            &opts,
        )?;
        let ode_end = ode.last().0;
        let mut worst: f64 = 0.0;
        let mut compared = 0;
        for state in run.checkpoint_states.iter().chain(std::iter::once(&run.final_state)) {
            if state.t > ode_end {
                continue;
            }
            let r = ode.radius_at(state.t)?;
            for &rho in &state.rho {
                worst = worst.max((rho - r).abs());
            }
            compared += 1;
        }
        let m = &run.record.manifest;
        out.check(Check::new("max_radius_gap", worst, "<=", s.tol(1e-5)));
        out.check(Check::flag(
            "ran_to_collapse",
            matches!(m.stop_reason, StopReason::PoleMargin | StopReason::Collapse),
        ));
        out.info("compared_states", compared);
        out.info("final_time", m.final_time);
        out.info("ode_collapse_time", tc);
        out.info("steps", m.steps);
        out.series.insert("circle_csf".into(), csv(&run.record.series)?);
        Ok(())
    })
}

// ---------------------------------------------------------------- c04, c05

fn perturbed_csf_run(s: Suite) -> Result<CurveRun> {
    let n = s.res(512);
    let initial = InitialCurve::PerturbedCircle {
        radius: 1.0,
        amplitude: 0.05,
        mode: 2,
    }
    .build(n, DiffMode::Spectral)?;
    let set = QuantitySet::new(vec![
        Quantity::Length,
        Quantity::TotalCurvature,
        Quantity::Q,
        Quantity::Area,
        Quantity::GaussBonnetResidual,
        Quantity::KappaMin,
        Quantity::KappaMax,
    ]);
    let opts = RunOptions {
        snapshot_every: Some(1000),
        ..RunOptions::default()
    };
    curve_flow::run(initial, &FlowSpec::curve_shortening(), &set, &opts)
}

type RunCache = Mutex<BTreeMap<&'static str, Arc<CurveRun>>>;

fn cached_perturbed_run(s: Suite) -> Result<Arc<CurveRun>> {
    static CACHE: OnceLock<RunCache> = OnceLock::new();
    let key = match s {
        Suite::Fast => "fast",
        Suite::Full => "full",
    };
    let cache = CACHE.get_or_init(|| Mutex::new(BTreeMap::new()));
    if let Some(run) = cache.lock().unwrap().get(key) {
        return Ok(run.clone());
    }
    let run = Arc::new(perturbed_csf_run(s)?);
    cache.lock().unwrap().insert(key, run.clone());
    Ok(run)
}

fn c04(s: Suite) -> Outcome {
    guard(|out| {
        let run = cached_perturbed_run(s)?;
        let template = &run.final_state;
        let mut worst: f64 = 0.0;
        for snap in &run.record.snapshots {
            let rho = snap
                .column("rho")
                .ok_or_else(|| sphereflow::Error::MissingData("snapshot without rho".into()))?;
            let c = template.with_rho(rho, snap.t)?;
            worst = worst.max(quantities::gauss_bonnet_residual(&c).abs());
        }
        out.check(Check::new("max_gauss_bonnet_residual", worst, "<=", s.tol(1e-6)));
        out.info("snapshots", run.record.snapshots.len());
        out.info("stop_reason", format!("{:?}", run.record.manifest.stop_reason));
        out.series.insert("perturbed_csf".into(), csv(&run.record.series)?);
        Ok(())
    })
}

fn c05(s: Suite) -> Outcome {
    guard(|out| {
        let run = cached_perturbed_run(s)?;
        let q: Vec<f64> = run.record.series.pairs("q").iter().map(|p| p.1).collect();
        let four_pi2 = 4.0 * PI * PI;
        let worst_increase = q
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        let min_q = q.iter().cloned().fold(f64::INFINITY, f64::min);
        let terminal = *q.last().unwrap_or(&f64::NAN);
        out.check(Check::new("max_relative_step_increase", worst_increase, "<=", s.tol(1e-8)));
        out.check(Check::new(
            "min_q_over_floor",
            min_q / four_pi2,
            ">=",
            1.0 - s.tol(1e-6),
        ));
        out.check(Check::new("terminal_q_gap", (terminal - four_pi2).abs(), "<=", s.tol(1e-4)));
        out.check(Check::flag(
            "stopped_at_pole_margin",
            run.record.manifest.stop_reason == StopReason::PoleMargin,
        ));
        out.info("rows", q.len());
        out.info("initial_q", q[0]);
        Ok(())
    })
}

// ---------------------------------------------------------------- c06

fn c06(s: Suite) -> Outcome {
    guard(|out| {
        let n = s.res(512);
        let ellipse = PlanarRadialCurve::ellipse(n, 2.0, 1.0, DiffMode::Spectral)?;
        for (name, pair) in [
            ("csf_oval", EquivalencePair::CsfOval),
            ("affine_ellipse", EquivalencePair::AffineEllipse),
        ] {
            let report = gnomonic::equivalence_check(pair, &ellipse, 0.3, 6)?;
            out.check(Check::new(&format!("{name}_max_gap"), report.max_gap, "<", s.tol(1e-3)));
        }
        Ok(())
    })
}

// ---------------------------------------------------------------- c07

fn c07(s: Suite) -> Outcome {
    guard(|out| {
        let n = s.res(512);
        let times = [-1.0, -3.0, -10.0];
        let cal = gnomonic::calibrate_oval(&times, n)?;
        out.check(Check::new("calibration_residual", cal.max_residual, "<", gnomonic::CALIBRATION_GATE));
        let family = AncientFamily::AngenentOval { scale: 1.0 };
        let sample = |t: f64| -> Result<PlanarRadialCurve> {
            if cal.passed {
                family.sample(t, n, DiffMode::Spectral)
            } else {
                gnomonic::oval_by_forward_flow(t, t.abs() + PI, n)
            }
        };
        let mut kmax = Vec::new();
        let mut width = 0.0;
        for &t in &times {
            let p = sample(t)?;
            let c = gnomonic::to_sphere(&p)?;
            kmax.push(c.kappa_max());
            width = p.x_width();
        }
        let monotone = kmax.windows(2).all(|w| w[1] > w[0]);
        out.check(Check::flag("max_kappa_monotone", monotone));
        out.check(Check::new("max_kappa_growth", kmax[2] / kmax[0], ">", 5.0));
        out.check(Check::new("x_width_gap_at_t-10", (width - PI).abs(), "<=", s.tol(1e-3)));
        out.info("max_kappa", kmax.clone());
        out.info("source", format!("{:?}", cal.source));

        let series = family_series(|t| sample(t), &(1..=12).map(|k| -(k as f64)).collect::<Vec<_>>())?;
        if let Ok(r) = quantities::backwards_limit_report(&series) {
            out.info("limit_verdict", format!("{:?}", r.verdict));
        }
        Ok(())
    })
}

/// Series of projected family members, one row per time, in increasing time.
fn family_series(
    sample: impl Fn(f64) -> Result<PlanarRadialCurve>,
    times: &[f64],
) -> Result<Series> {
    let set = QuantitySet::new(vec![
        Quantity::C1DistanceToEquator,
        Quantity::HMax,
        Quantity::KappaMax,
        Quantity::RoundnessResidual,
    ]);
    let mut sorted = times.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut series = Series::new(set.columns(quantities::Geometry::Curve));
    let history = quantities::FieldHistory::new(1);
    for t in sorted {
        let mut c = gnomonic::to_sphere(&sample(t)?)?;
        c.t = t;
        series.push(quantities::eval_curve(&c, None, &set, &history));
    }
    Ok(series)
}

// ---------------------------------------------------------------- c08

fn c08(s: Suite) -> Outcome {
    guard(|out| {
        let n = s.res(512);
        let family = AncientFamily::ShrinkingEllipse { a: 2.0, b: 1.0 };
        let times: Vec<f64> = (0..12).map(|k| -0.25 * 2f64.powi(k)).collect();
        let series = family_series(|t| family.sample(t, n, DiffMode::Spectral), &times)?;
        // Rows are in increasing time, so going up the table is going back in time.
        let c1: Vec<f64> = series.pairs("rho_c1_norm").iter().map(|p| p.1).collect();
        let round: Vec<f64> = series.pairs("roundness_residual").iter().map(|p| p.1).collect();
        let decreasing_backward = c1.windows(2).all(|w| w[0] < w[1]);
        out.check(Check::flag("c1_decreasing_backward", decreasing_backward && c1.len() == times.len()));
        out.check(Check::new(
            "min_roundness_residual",
            round.iter().cloned().fold(f64::INFINITY, f64::min),
            ">",
            1e-3,
        ));
        out.info("c1_oldest", c1[0]);
        out.info("c1_newest", c1[c1.len() - 1]);
        if let Ok(r) = quantities::backwards_limit_report(&series) {
            out.info("limit_verdict", format!("{:?}", r.verdict));
        }
        Ok(())
    })
}

// ---------------------------------------------------------------- c09

fn c09(s: Suite) -> Outcome {
    guard(|out| {
        // Star-shapedness of the reflected equator on a grid of 64 angles.
        let equator = RadialCurve::circle(s.res(256), FRAC_PI_2, DiffMode::Spectral)?;
        let shape = Shape::from_curve(&equator);
        let mut flips_exactly = true;
        for k in 0..64 {
            let delta = k as f64 * PI / 128.0;
            let expected = delta < FRAC_PI_4;
            for phi in [0.0, 0.7, 2.1, 4.4] {
                let got = reflection::reflected_star_shaped(&ReflectionSetup::new(&shape, delta, phi));
                flips_exactly &= got == expected;
            }
        }
        out.check(Check::flag("equator_flip_at_quarter_pi", flips_exactly));

        // Empirical threshold as the lower reflection angle halves.
        let grid = VGrid {
            deltas: s.res(64),
            azimuths: s.res(32),
        };
        let opts = AlphaOptions {
            grid,
            resolution: s.res(256),
            max_amplitude: 0.5,
            tolerance: 2e-3,
        };
        let family = PerturbationFamily::SingleMode { mode: 2 };
        let mut alphas = Vec::new();
        for k in 0..3 {
            let delta1 = FRAC_PI_8 / 2f64.powi(k + 1);
            alphas.push(reflection::alpha_threshold(FRAC_PI_8, delta1, family, opts)?.alpha);
        }
        out.check(Check::new("alpha_pi8_pi16", alphas[0], ">", 0.0));
        out.check(Check::flag(
            "alpha_decreasing",
            alphas.windows(2).all(|w| w[1] < w[0]),
        ));
        out.info("alphas", alphas);

        // Margins along curve shortening from a small non-negative height.
        let n = s.res(256);
        let initial = RadialCurve::from_fn(n, DiffMode::Spectral, |th| {
            FRAC_PI_2 - (0.0125 + 0.0025 * (2.0 * th).cos())
        })?;
        let c1 = curve_flow::c1_distance_to_equator(&initial.rho, &initial.rho_theta);
        out.info("initial_c1", c1);
        let shape0 = Shape::from_curve(&initial);
        let dirs = grid.directions(&shape0, FRAC_PI_8, FRAC_PI_8 / 2.0);
        let established: Vec<(f64, f64)> =
            reflection::sweep_directions(&shape0, &dirs, reflection::DEFAULT_MARGIN_EPS)
                .into_iter()
                .filter(|r| r.outcome.is_some_and(|o| o.verdict))
                .map(|r| (r.delta, r.phi))
                .collect();
        out.info("established_directions", established.len());
        let checkpoints: Vec<f64> = (1..=12).map(|k| 0.25 * k as f64).collect();
        let mut spec = FlowSpec::curve_shortening();
        spec.stops.max_time = 3.0;
        let run = curve_flow::run(
            initial,
            &spec,
            &QuantitySet::none(),
            &RunOptions {
                checkpoints,
                cadence: usize::MAX,
                ..RunOptions::default()
            },
        )?;
        let mut worst = f64::INFINITY;
        let mut checked = 0;
        for state in &run.checkpoint_states {
            // Only states with non-negative height are covered by the claim.
            if state.rho.iter().any(|&r| r > FRAC_PI_2) {
                continue;
            }
            let shape = Shape::from_curve(state);
            for r in reflection::sweep_directions(&shape, &established, reflection::DEFAULT_MARGIN_EPS) {
                if let Some(o) = r.outcome {
                    worst = worst.min(o.min_margin);
                } else {
                    worst = f64::NEG_INFINITY;
                }
            }
            checked += 1;
        }
        out.check(Check::new("min_margin_along_flow", worst, ">=", -s.tol(1e-8)));
        out.check(Check::new("checked_states", checked as f64, ">=", 1.0));
        Ok(())
    })
}

// ---------------------------------------------------------------- c10

fn c10(s: Suite) -> Outcome {
    guard(|out| {
        let m = s.res(256);
        let n = 2;
        let speed = SpeedFunction::builtin("norm_of_A", &[], n)?;
        let initial = InitialAxisym::PerturbedSphere {
            radius: 1.0,
            amplitude: 0.01,
            mode: 2,
        }
        .build(n, m, DiffMode::Spectral)?;
        let stops = StopRules {
            max_time: 0.2,
            ..StopRules::default()
        };
        let set = QuantitySet::new(vec![
            Quantity::WMin,
            Quantity::WMax,
            Quantity::KappaMin,
            Quantity::HMax,
        ]);
        let chain_bound = 1.0 / n as f64;
        let opts = AxisymOptions {
            cadence: 1,
            ..AxisymOptions::default()
        };
        let run = axisym_flow::axi_run(initial, &speed, &stops, &set, &opts)?;
        let mut chain_worst = f64::NEG_INFINITY;
        let pairs = run.record.series.pairs("w_min");
        for &(_, w) in &pairs {
            chain_worst = chain_worst.max(w - chain_bound);
        }
        let (t, y): (Vec<f64>, Vec<f64>) = pairs
            .iter()
            .map(|&(t, w)| (t, chain_bound - w))
            .filter(|&(_, d)| d > 1e-11)
            .map(|(t, d)| (t, d.ln()))
            .unzip();
        let fit = linear_fit(&t, &y);
        out.check(Check::new(
            "deficit_exponent_relative_error",
            ((fit.slope - (-2.0 * n as f64)) / (2.0 * n as f64)).abs(),
            "<=",
            0.2,
        ));
        out.check(Check::new("chain_excess", chain_worst, "<=", s.tol(1e-10)));
        out.info("fitted_exponent", fit.slope);
        out.info("fit_r_squared", fit.r_squared);
        out.info("fit_rows", t.len());
        out.info("stop_reason", format!("{:?}", run.record.manifest.stop_reason));
        out.series.insert("pinching".into(), csv(&run.record.series)?);
        Ok(())
    })
}

// ---------------------------------------------------------------- c11

fn c11(s: Suite) -> Outcome {
    guard(|out| {
        let set = QuantitySet::new(vec![Quantity::KappaMin, Quantity::HarnackMin]);
        let mut spec = FlowSpec::curve_shortening();
        spec.stops.max_time = 0.5;
        let circle = curve_flow::run(
            RadialCurve::circle(s.res(128), 1.0, DiffMode::Spectral)?,
            &spec,
            &set,
            &RunOptions::default(),
        )?;
        let k = circle.record.series.column("kappa_min").unwrap_or_default();
        let h = circle.record.series.column("harnack_min").unwrap_or_default();
        let mut worst: f64 = 0.0;
        let mut rows = 0;
        for (k, h) in k.iter().zip(&h) {
            if let (Some(k), Some(h)) = (k, h) {
                worst = worst.max((h - k * (1.0 + k * k)).abs());
                rows += 1;
            }
        }
        out.check(Check::new("circle_max_error", worst, "<=", s.tol(1e-8)));
        out.check(Check::new("circle_rows", rows as f64, ">=", 10.0));

        let initial = InitialCurve::PerturbedCircle {
            radius: 1.0,
            amplitude: 0.02,
            mode: 2,
        }
        .build(s.res(512), DiffMode::Spectral)?;
        // Ends at radius about 0.01; the remaining pole-margin tail is a
        // round shrinking circle.
        let mut spec = FlowSpec::curve_shortening();
        spec.stops.max_kappa = 100.0;
        let run = curve_flow::run(initial, &spec, &set, &RunOptions::default())?;
        let min = quantities::harnack_monitor(&run.record, &SpeedFunction::mean_curvature(1))?;
        out.check(Check::new("perturbed_min", min, ">=", -s.tol(1e-6)));
        out.info("perturbed_stop", format!("{:?}", run.record.manifest.stop_reason));
        out.series.insert("harnack_circle".into(), csv(&circle.record.series)?);
        out.series.insert("harnack_perturbed".into(), csv(&run.record.series)?);
        Ok(())
    })
}

// ---------------------------------------------------------------- c12

/// Criteria whose runs write series files.
const SERIES_CRITERIA: [fn(Suite) -> Outcome; 4] = [c03, c04_fresh, c10, c11];

fn c04_fresh(s: Suite) -> Outcome {
    guard(|out| {
        let run = perturbed_csf_run(s)?;
        out.series.insert("perturbed_csf".into(), csv(&run.record.series)?);
        Ok(())
    })
}

fn fast_digests() -> BTreeMap<String, String> {
    let mut all = BTreeMap::new();
    for f in SERIES_CRITERIA {
        for (k, v) in f(Suite::Fast).series {
            all.insert(k, crate::sha256_hex(&v));
        }
    }
    all
}

fn c12(s: Suite) -> Outcome {
    guard(|out| {
        let started = std::time::Instant::now();
        let first = fast_digests();
        let fast_wall = started.elapsed().as_secs_f64();
        let second = fast_digests();
        out.check(Check::flag("series_identical", !first.is_empty() && first == second));
        out.info("series_files", first.len());
        out.info("fast_series_wall_seconds", fast_wall);
        let _ = s;
        Ok(())
    })
}

