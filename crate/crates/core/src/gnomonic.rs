//! Central projection between the open upper hemisphere and its tangent plane
//! at the pole, planar radial-graph flows, and explicit planar ancient
//! solutions.
//!
//! In polar form the projection is `rho_bar = tan(rho)` at equal angle.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::curve_flow::{self, FlowKind, FlowSpec, RadialCurve, RunOptions, TimeStepPolicy};
use crate::error::{Error, Result};
use crate::quantities::QuantitySet;
use crate::record::StopReason;
use crate::spectral::{DiffMode, Differentiator};
use crate::stepper::rk4;

/// Planar curvature of a polar graph.
pub fn planar_curvature(r: f64, d1: f64, d2: f64) -> f64 {
    let q = r * r + d1 * d1;
    (r * r + 2.0 * d1 * d1 - r * d2) / (q * q.sqrt())
}

#[derive(Clone, Debug)]
pub struct PlanarRadialCurve {
    diff: Arc<Differentiator>,
    pub t: f64,
    pub rho_bar: Vec<f64>,
    pub rho_bar_theta: Vec<f64>,
    pub rho_bar_thetatheta: Vec<f64>,
    pub kappa_bar: Vec<f64>,
    /// Support function.
    pub h_bar: Vec<f64>,
}

impl PlanarRadialCurve {
    pub fn new(rho_bar: Vec<f64>, t: f64, mode: DiffMode) -> Result<Self> {
        let diff = Arc::new(Differentiator::new(rho_bar.len(), mode));
        Self::with_differentiator(diff, rho_bar, t)
    }

    pub fn with_differentiator(diff: Arc<Differentiator>, rho_bar: Vec<f64>, t: f64) -> Result<Self> {
        if rho_bar.len() != diff.len() {
            return Err(Error::Precondition("grid size mismatch".into()));
        }
        if let Some((i, &r)) = rho_bar
            .iter()
            .enumerate()
            .find(|(_, r)| !(r.is_finite() && **r > 0.0))
        {
            return Err(Error::Precondition(format!(
                "radius {r} at node {i}: curve must be star-shaped about the origin"
            )));
        }
        let (d1, d2) = diff.derivatives(&rho_bar);
        let kappa_bar = (0..rho_bar.len())
            .map(|i| planar_curvature(rho_bar[i], d1[i], d2[i]))
            .collect();
        let h_bar = (0..rho_bar.len())
            .map(|i| rho_bar[i] * rho_bar[i] / rho_bar[i].hypot(d1[i]))
            .collect();
        Ok(Self {
            diff,
            t,
            rho_bar,
            rho_bar_theta: d1,
            rho_bar_thetatheta: d2,
            kappa_bar,
            h_bar,
        })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(n: usize, mode: DiffMode, f: F) -> Result<Self> {
        let r = (0..n).map(|i| f(TAU * i as f64 / n as f64)).collect();
        Self::new(r, 0.0, mode)
    }

    pub fn ellipse(n: usize, a: f64, b: f64, mode: DiffMode) -> Result<Self> {
        Self::from_fn(n, mode, |th| ellipse_radius(a, b, th))
    }

    pub fn with_rho_bar(&self, rho_bar: Vec<f64>, t: f64) -> Result<Self> {
        Self::with_differentiator(self.diff.clone(), rho_bar, t)
    }

    pub fn differentiator(&self) -> &Arc<Differentiator> {
        &self.diff
    }

    pub fn len(&self) -> usize {
        self.rho_bar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho_bar.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.diff.spacing()
    }

    pub fn theta(&self, i: usize) -> f64 {
        TAU * i as f64 / self.len() as f64
    }

    /// Enclosed area `1/2 int rho_bar^2 dtheta`.
    pub fn area(&self) -> f64 {
        0.5 * self.rho_bar.iter().map(|r| r * r).sum::<f64>() * self.spacing()
    }

    /// Extent along the x axis.
    pub fn x_width(&self) -> f64 {
        let xs: Vec<f64> = (0..self.len())
            .map(|i| self.rho_bar[i] * self.theta(i).cos())
            .collect();
        xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            - xs.iter().cloned().fold(f64::INFINITY, f64::min)
    }
}

/// Polar radius of the origin-centered ellipse with semi-axes `a` (along x)
/// and `b`.
pub fn ellipse_radius(a: f64, b: f64, theta: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    a * b / (b * b * c * c + a * a * s * s).sqrt()
}

pub fn to_sphere(p: &PlanarRadialCurve) -> Result<RadialCurve> {
    let mode = p.differentiator().mode();
    let diff = Arc::new(Differentiator::new(p.len(), mode));
    RadialCurve::with_differentiator(diff, p.rho_bar.iter().map(|r| r.atan()).collect(), p.t)
}

pub fn from_sphere(c: &RadialCurve) -> Result<PlanarRadialCurve> {
    if let Some((node, &rho)) = c.rho.iter().enumerate().find(|(_, r)| **r >= FRAC_PI_2) {
        return Err(Error::Hemisphere { node, rho });
    }
    let mode = c.differentiator().mode();
    PlanarRadialCurve::new(c.rho.iter().map(|r| r.tan()).collect(), c.t, mode)
}

/// Spherical curvature predicted from planar data:
/// `((rho_bar^2 + 1) / (h_bar^2 + 1))^(3/2) kappa_bar`.
pub fn projected_curvature(p: &PlanarRadialCurve) -> Vec<f64> {
    (0..p.len())
        .map(|i| {
            let r2 = p.rho_bar[i] * p.rho_bar[i];
            let h2 = p.h_bar[i] * p.h_bar[i];
            ((r2 + 1.0) / (h2 + 1.0)).powf(1.5) * p.kappa_bar[i]
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanarFlow {
    Csf,
    AffineNormal,
}

/// `d rho_bar / dt` and the effective diffusivity at every node.
fn planar_rates(p: &PlanarRadialCurve, kind: PlanarFlow) -> Result<(Vec<f64>, f64)> {
    let mut rates = Vec::with_capacity(p.len());
    let mut diffusivity: f64 = 0.0;
    for i in 0..p.len() {
        let r = p.rho_bar[i];
        let q = r * r + p.rho_bar_theta[i] * p.rho_bar_theta[i];
        let k = p.kappa_bar[i];
        let (speed, slope) = match kind {
            PlanarFlow::Csf => (k, 1.0),
            PlanarFlow::AffineNormal => {
                if k <= 0.0 {
                    return Err(Error::ConvexityLost { node: i, kappa: k });
                }
                let root = k.cbrt();
                (root, root / (3.0 * k))
            }
        };
        rates.push(-speed * q.sqrt() / r);
        diffusivity = diffusivity.max(slope / q);
    }
    Ok((rates, diffusivity))
}

pub fn planar_stable_dt(p: &PlanarRadialCurve, kind: PlanarFlow, policy: TimeStepPolicy) -> Result<f64> {
    match policy {
        TimeStepPolicy::Fixed(dt) => Ok(dt),
        TimeStepPolicy::ExplicitCfl(c) => {
            let h = p.spacing();
            Ok(c * h * h / planar_rates(p, kind)?.1.max(1.0))
        }
    }
}

pub fn planar_step_by(p: &PlanarRadialCurve, kind: PlanarFlow, dt: f64) -> Result<PlanarRadialCurve> {
    let mut cached = Some(planar_rates(p, kind)?.0);
    let next = rk4(&p.rho_bar, p.t, dt, |y| match cached.take() {
        Some(k1) => Ok(k1),
        None => planar_rates(&p.with_rho_bar(y.to_vec(), p.t)?, kind).map(|r| r.0),
    })?;
    p.with_rho_bar(next, p.t + dt)
        .map_err(|_| Error::NumericalBlowup { t: p.t })
}

/// One explicit step with the curve-flow CFL rule.
pub fn planar_flow_step(
    p: &PlanarRadialCurve,
    kind: PlanarFlow,
    policy: TimeStepPolicy,
) -> Result<PlanarRadialCurve> {
    planar_step_by(p, kind, planar_stable_dt(p, kind, policy)?)
}

/// Evolves to each checkpoint in turn and returns the states there.
pub fn planar_run(
    initial: &PlanarRadialCurve,
    kind: PlanarFlow,
    policy: TimeStepPolicy,
    checkpoints: &[f64],
) -> Result<Vec<PlanarRadialCurve>> {
    let mut state = initial.clone();
    let mut out = Vec::with_capacity(checkpoints.len());
    for &target in checkpoints {
        while state.t < target {
            let dt = planar_stable_dt(&state, kind, policy)?;
            if state.t + dt >= target {
                state = planar_step_by(&state, kind, target - state.t)?;
                state.t = target;
            } else {
                state = planar_step_by(&state, kind, dt)?;
            }
        }
        out.push(state.clone());
    }
    Ok(out)
}

/// How the Angenent oval samples were produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OvalSource {
    ImplicitRelation,
    ForwardFlow,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AncientFamily {
    /// Curve shortening solution `e^t cosh y = cos x`, rescaled by `scale`
    /// (lengths times `scale`, times `scale^2`).
    AngenentOval { scale: f64 },
    /// Origin-centered ellipses with semi-axes proportional to `(a, b)`,
    /// vanishing at `t = 0` under the affine normal flow.
    ShrinkingEllipse { a: f64, b: f64 },
}

/// Distance from the origin to the oval along the ray at angle `theta`.
pub fn oval_ray_radius(t: f64, theta: f64) -> Result<f64> {
    let et = t.exp();
    let (s, c) = theta.sin_cos();
    let g = |r: f64| et * (r * s).cosh() - (r * c).cos();
    let dg = |r: f64| et * s * (r * s).sinh() + c * (r * c).sin();
    let mut hi = f64::INFINITY;
    if c.abs() > 1e-300 {
        hi = hi.min(FRAC_PI_2 / c.abs());
    }
    if s.abs() > 1e-300 {
        hi = hi.min((1.0 / et).acosh() / s.abs());
    }
    let mut lo = 0.0;
    // Along the axes the bracket end is the root itself, up to rounding.
    if hi.is_finite() && g(hi) < 0.0 && g(hi) > -1e-12 {
        return Ok(hi);
    }
    if !(hi.is_finite() && g(hi) >= 0.0 && g(lo) < 0.0) {
        return Err(Error::RootFinding { theta });
    }
    let mut r = 0.5 * (lo + hi);
    for _ in 0..200 {
        let gr = g(r);
        if gr == 0.0 {
            return Ok(r);
        }
        if gr < 0.0 {
            lo = r;
        } else {
            hi = r;
        }
        let d = dg(r);
        if d > 0.0 && (gr / d).abs() < 1e-16 * r {
            break;
        }
        let newton = r - gr / d;
        r = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    if !r.is_finite() {
        return Err(Error::RootFinding { theta });
    }
    Ok(r)
}

impl AncientFamily {
    pub fn sample(&self, t: f64, n: usize, mode: DiffMode) -> Result<PlanarRadialCurve> {
        if !(t < 0.0) {
            return Err(Error::Precondition(format!(
                "ancient families are sampled at negative times, got {t}"
            )));
        }
        match *self {
            AncientFamily::AngenentOval { scale } => {
                let tau = t / (scale * scale);
                let r = (0..n)
                    .map(|i| oval_ray_radius(tau, TAU * i as f64 / n as f64).map(|r| r * scale))
                    .collect::<Result<Vec<_>>>()?;
                PlanarRadialCurve::new(r, t, mode)
            }
            AncientFamily::ShrinkingEllipse { a, b } => {
                let lambda = ellipse_scale(a, b, t);
                let mut p = PlanarRadialCurve::from_fn(n, mode, |th| {
                    lambda * ellipse_radius(a, b, th)
                })?;
                p.t = t;
                Ok(p)
            }
        }
    }
}

/// Homothety factor of the shrinking ellipse:
/// `lambda^(4/3) = -(4/3) (ab)^(-2/3) t`.
pub fn ellipse_scale(a: f64, b: f64, t: f64) -> f64 {
    (-(4.0 / 3.0) * (a * b).powf(-2.0 / 3.0) * t).powf(0.75)
}

pub fn sample_ancient(f: &AncientFamily, t: f64, n: usize) -> Result<PlanarRadialCurve> {
    f.sample(t, n, DiffMode::Spectral)
}

/// Largest mismatch between the time derivative of the sampled family, taken
/// by central differences, and the planar flow's right-hand side.
pub fn flow_residual(f: &AncientFamily, kind: PlanarFlow, t: f64, n: usize) -> Result<f64> {
    let dt = 1e-5 * t.abs().max(1e-3);
    let before = sample_ancient(f, t - dt, n)?;
    let after = sample_ancient(f, t + dt, n)?;
    let now = sample_ancient(f, t, n)?;
    let (rates, _) = planar_rates(&now, kind)?;
    Ok((0..n)
        .map(|i| ((after.rho_bar[i] - before.rho_bar[i]) / (2.0 * dt) - rates[i]).abs())
        .fold(0.0, f64::max))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OvalCalibration {
    pub times: Vec<f64>,
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub passed: bool,
    pub source: OvalSource,
}

pub const CALIBRATION_GATE: f64 = 1e-6;

/// Checks that the implicit relation moves by curve shortening at the given
/// sample times.
pub fn calibrate_oval(times: &[f64], n: usize) -> Result<OvalCalibration> {
    let family = AncientFamily::AngenentOval { scale: 1.0 };
    let residuals = times
        .iter()
        .map(|&t| flow_residual(&family, PlanarFlow::Csf, t, n))
        .collect::<Result<Vec<_>>>()?;
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    let passed = max_residual < CALIBRATION_GATE;
    Ok(OvalCalibration {
        times: times.to_vec(),
        residuals,
        max_residual,
        passed,
        source: if passed {
            OvalSource::ImplicitRelation
        } else {
            OvalSource::ForwardFlow
        },
    })
}

/// Oval-like curve at time `t < 0` obtained without the implicit relation:
/// a stadium of width `pi` and half-length `half_length` flowed forward by
/// curve shortening until its area reaches `-2 pi t`.
pub fn oval_by_forward_flow(t: f64, half_length: f64, n: usize) -> Result<PlanarRadialCurve> {
    let target_area = -TAU * t;
    let stadium = |theta: f64| -> f64 {
        let (s, c) = theta.sin_cos();
        let (ax, ay) = (c.abs(), s.abs());
        let side = if ax > 1e-300 { FRAC_PI_2 / ax } else { f64::INFINITY };
        // Ray against a cap: circle of radius pi/2 centered at (0, half_length - pi/2).
        let cy = half_length - FRAC_PI_2;
        let b = cy * ay;
        let cap = b + (b * b - cy * cy + FRAC_PI_2 * FRAC_PI_2).sqrt();
        if side * ay <= cy {
            side
        } else {
            cap
        }
    };
    let mut p = PlanarRadialCurve::from_fn(n, DiffMode::Spectral, stadium)?;
    if p.area() < target_area {
        return Err(Error::Precondition(
            "stadium too small for the requested time".into(),
        ));
    }
    let policy = TimeStepPolicy::ExplicitCfl(curve_flow::DEFAULT_CFL);
    while p.area() > target_area {
        let dt = planar_stable_dt(&p, PlanarFlow::Csf, policy)?;
        let remaining = (p.area() - target_area) / TAU;
        p = planar_step_by(&p, PlanarFlow::Csf, dt.min(remaining.max(1e-12)))?;
    }
    p.t = t;
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquivalencePair {
    /// Planar curve shortening against the spherical oval flow.
    CsfOval,
    /// Planar affine normal flow against the spherical ellipse flow.
    AffineEllipse,
}

impl EquivalencePair {
    pub fn planar(self) -> PlanarFlow {
        match self {
            EquivalencePair::CsfOval => PlanarFlow::Csf,
            EquivalencePair::AffineEllipse => PlanarFlow::AffineNormal,
        }
    }

    pub fn spherical(self) -> FlowKind {
        match self {
            EquivalencePair::CsfOval => FlowKind::AngenentOvalFlow,
            EquivalencePair::AffineEllipse => FlowKind::EllipseFlow,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotGap {
    pub t: f64,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub max_gap: f64,
    pub per_snapshot: Vec<SnapshotGap>,
}

/// Runs the planar flow and projects it, runs the matching spherical flow on
/// the projected initial curve, and compares nodewise at common times.
pub fn equivalence_check(
    pair: EquivalencePair,
    initial: &PlanarRadialCurve,
    horizon: f64,
    snapshots: usize,
) -> Result<GapReport> {
    if !(horizon >= 0.0) {
        return Err(Error::Precondition("horizon must be non-negative".into()));
    }
    let t0 = initial.t;
    let times: Vec<f64> = if horizon == 0.0 {
        vec![t0]
    } else {
        (1..=snapshots.max(1))
            .map(|k| t0 + horizon * k as f64 / snapshots.max(1) as f64)
            .collect()
    };
    let policy = TimeStepPolicy::default();
    let planar = if horizon == 0.0 {
        vec![initial.clone()]
    } else {
        planar_run(initial, pair.planar(), policy, &times)?
    };

    let sphere0 = to_sphere(initial)?;
    let spherical: Vec<RadialCurve> = if horizon == 0.0 {
        vec![sphere0]
    } else {
        let mut spec = FlowSpec::new(pair.spherical());
        spec.stops.max_time = times[times.len() - 1];
        spec.stops.max_kappa = f64::MAX;
        let opts = RunOptions {
            checkpoints: times.clone(),
            cadence: usize::MAX,
            ..RunOptions::default()
        };
        let run = curve_flow::run(sphere0, &spec, &QuantitySet::none(), &opts)?;
        if run.record.manifest.stop_reason != StopReason::MaxTime
            || run.checkpoint_states.len() != times.len()
        {
            return Err(Error::Precondition(format!(
                "spherical run stopped early: {:?}",
                run.record.manifest.stop_reason
            )));
        }
        run.checkpoint_states
    };

    let mut per_snapshot = Vec::with_capacity(times.len());
    for (p, s) in planar.iter().zip(&spherical) {
        let gap = p
            .rho_bar
            .iter()
            .zip(&s.rho)
            .map(|(rb, r)| (rb.atan() - r).abs())
            .fold(0.0, f64::max);
        per_snapshot.push(SnapshotGap { t: p.t, gap });
    }
    let max_gap = per_snapshot.iter().map(|g| g.gap).fold(0.0, f64::max);
    Ok(GapReport {
        max_gap,
        per_snapshot,
    })
}

/// Angle of the lune-like region: the oval at very negative time fills the
/// slab `|x| < pi/2`, whose image on the sphere is bounded by two great
/// circles through `(0, +-1, 0)`.
pub fn slab_image_radius(theta: f64) -> f64 {
    let c = theta.cos().abs();
    if c < 1e-300 {
        FRAC_PI_2
    } else {
        (FRAC_PI_2 / c).atan()
    }
}

/// Fraction of the sphere's upper hemisphere area by which the region bounded
/// by `curve` differs from the slab image.
pub fn lune_symmetric_difference(curve: &RadialCurve) -> f64 {
    let h = curve.spacing();
    (0..curve.len())
        .map(|i| {
            let a = curve.rho[i];
            let b = slab_image_radius(curve.theta(i));
            (a.cos() - b.cos()).abs()
        })
        .sum::<f64>()
        * h
        / TAU
}

/// `pi` in the planar picture corresponds to the width of the limiting slab.
pub const SLAB_WIDTH: f64 = PI;
