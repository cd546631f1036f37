//! Closed curves on the unit sphere written as radial graphs `rho(theta)` about
//! the north pole, evolved by curvature flows.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::quantities::{self, FieldHistory, Geometry, Quantity, QuantitySet};
use crate::record::{Manifest, RunRecord, Series, Snapshot, StopReason};
use crate::spectral::{DiffMode, Differentiator};
use crate::speeds::SpeedFunction;
use crate::stepper::rk4;

pub const DEFAULT_POLE_MARGIN: f64 = 1e-3;
pub const DEFAULT_CFL: f64 = 0.2;

/// Geodesic curvature of a radial graph from its first two derivatives.
pub fn graph_curvature(rho: f64, d1: f64, d2: f64) -> f64 {
    let (s, c) = rho.sin_cos();
    let w2 = s * s + d1 * d1;
    (-d2 * s + 2.0 * d1 * d1 * c + c * s * s) / (w2 * w2.sqrt())
}

#[derive(Clone, Debug)]
pub struct RadialCurve {
    diff: Arc<Differentiator>,
    pub t: f64,
    pub rho: Vec<f64>,
    pub rho_theta: Vec<f64>,
    pub rho_thetatheta: Vec<f64>,
    pub kappa: Vec<f64>,
    /// `sqrt(sin^2 rho + rho_theta^2)`; the arclength element is this times the spacing.
    pub w: Vec<f64>,
    /// `w / sin rho`.
    pub v: Vec<f64>,
}

impl RadialCurve {
    pub fn new(rho: Vec<f64>, t: f64, mode: DiffMode) -> Result<Self> {
        let diff = Arc::new(Differentiator::new(rho.len(), mode));
        Self::with_differentiator(diff, rho, t)
    }

    /// Radii must lie strictly inside `(0, pi)`.
    pub fn with_differentiator(diff: Arc<Differentiator>, rho: Vec<f64>, t: f64) -> Result<Self> {
        if rho.len() != diff.len() {
            return Err(Error::Precondition(format!(
                "expected {} radii, got {}",
                diff.len(),
                rho.len()
            )));
        }
        if let Some((node, &r)) = rho
            .iter()
            .enumerate()
            .find(|(_, r)| !(**r > 0.0 && **r < PI))
        {
            return Err(Error::PoleMargin { node, rho: r });
        }
        let (rho_theta, rho_thetatheta) = diff.derivatives(&rho);
        let n = rho.len();
        let mut kappa = Vec::with_capacity(n);
        let mut w = Vec::with_capacity(n);
        let mut v = Vec::with_capacity(n);
        for i in 0..n {
            let (s, c) = rho[i].sin_cos();
            let (d1, d2) = (rho_theta[i], rho_thetatheta[i]);
            let w2 = s * s + d1 * d1;
            let wi = w2.sqrt();
            kappa.push((-d2 * s + 2.0 * d1 * d1 * c + c * s * s) / (w2 * wi));
            w.push(wi);
            v.push(wi / s);
        }
        Ok(Self {
            diff,
            t,
            rho,
            rho_theta,
            rho_thetatheta,
            kappa,
            w,
            v,
        })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(n: usize, mode: DiffMode, f: F) -> Result<Self> {
        let rho = (0..n).map(|i| f(TAU * i as f64 / n as f64)).collect();
        Self::new(rho, 0.0, mode)
    }

    pub fn circle(n: usize, radius: f64, mode: DiffMode) -> Result<Self> {
        Self::new(vec![radius; n], 0.0, mode)
    }

    /// Same grid, new radii.
    pub fn with_rho(&self, rho: Vec<f64>, t: f64) -> Result<Self> {
        Self::with_differentiator(self.diff.clone(), rho, t)
    }

    pub fn differentiator(&self) -> &Arc<Differentiator> {
        &self.diff
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.diff.spacing()
    }

    pub fn theta(&self, i: usize) -> f64 {
        TAU * i as f64 / self.len() as f64
    }

    pub fn thetas(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.theta(i)).collect()
    }

    pub fn ds_weight(&self, i: usize) -> f64 {
        self.w[i] * self.spacing()
    }

    pub fn kappa_min(&self) -> f64 {
        self.kappa.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn kappa_max(&self) -> f64 {
        self.kappa.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn rho_spread(&self) -> f64 {
        let max = self.rho.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = self.rho.iter().cloned().fold(f64::INFINITY, f64::min);
        max - min
    }

    pub fn check_pole_margin(&self, margin: f64) -> Result<()> {
        match self
            .rho
            .iter()
            .enumerate()
            .find(|(_, &r)| !(r > margin && r < PI - margin))
        {
            Some((node, &rho)) => Err(Error::PoleMargin { node, rho }),
            None => Ok(()),
        }
    }

    /// Embedding in R^3 with the pole at `(0, 0, 1)`.
    pub fn embed(&self) -> Vec<[f64; 3]> {
        (0..self.len())
            .map(|i| {
                let (s, c) = self.rho[i].sin_cos();
                let (st, ct) = self.theta(i).sin_cos();
                [s * ct, s * st, c]
            })
            .collect()
    }

    pub fn snapshot(&self, name: &str) -> Snapshot {
        Snapshot {
            name: name.to_string(),
            t: self.t,
            columns: vec!["theta".into(), "rho".into(), "kappa".into()],
            rows: (0..self.len())
                .map(|i| vec![self.theta(i), self.rho[i], self.kappa[i]])
                .collect(),
        }
    }
}

/// Per-node geodesic curvature, refusing graphs that come within the default
/// pole margin.
pub fn curvature_of_graph(curve: &RadialCurve) -> Result<Vec<f64>> {
    curve.check_pole_margin(DEFAULT_POLE_MARGIN)?;
    Ok(curve.kappa.clone())
}

/// Initial data for curve runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCurve {
    Circle {
        radius: f64,
    },
    /// `radius + amplitude * cos(mode * theta)`.
    PerturbedCircle {
        radius: f64,
        amplitude: f64,
        mode: u32,
    },
    /// `mean + sum_k cos[k-1] cos(k theta) + sin[k-1] sin(k theta)`.
    Fourier {
        mean: f64,
        #[serde(default)]
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
    /// Geodesic circle of the given radius whose center sits `offset` away
    /// from the pole along `theta = 0`.
    OffsetCircle {
        radius: f64,
        offset: f64,
    },
}

impl InitialCurve {
    pub fn radius_at(&self, theta: f64) -> f64 {
        match self {
            InitialCurve::Circle { radius } => *radius,
            InitialCurve::PerturbedCircle {
                radius,
                amplitude,
                mode,
            } => radius + amplitude * (*mode as f64 * theta).cos(),
            InitialCurve::Fourier { mean, cos, sin } => {
                let mut r = *mean;
                for (k, a) in cos.iter().enumerate() {
                    r += a * ((k + 1) as f64 * theta).cos();
                }
                for (k, b) in sin.iter().enumerate() {
                    r += b * ((k + 1) as f64 * theta).sin();
                }
                r
            }
            InitialCurve::OffsetCircle { radius, offset } => {
                offset_circle_radius(*radius, *offset, theta)
            }
        }
    }

    pub fn build(&self, n: usize, mode: DiffMode) -> Result<RadialCurve> {
        RadialCurve::from_fn(n, mode, |th| self.radius_at(th))
    }
}

/// Radial graph of a geodesic circle of radius `a` centered at polar distance
/// `d < a` from the pole, from the spherical law of cosines.
pub fn offset_circle_radius(a: f64, d: f64, theta: f64) -> f64 {
    let x = d.cos();
    let y = d.sin() * theta.cos();
    let norm = x.hypot(y);
    y.atan2(x) + (a.cos() / norm).acos()
}

#[derive(Clone, Debug)]
pub enum FlowKind {
    /// `d/dt x = -F(kappa) nu`.
    Geometric(SpeedFunction),
    /// Spherical image of planar curve shortening under central projection.
    AngenentOvalFlow,
    /// Spherical image of the planar affine normal flow under central projection.
    EllipseFlow,
}

impl FlowKind {
    pub fn name(&self) -> String {
        match self {
            FlowKind::Geometric(f) => format!("geometric({})", f.name()),
            FlowKind::AngenentOvalFlow => "angenent_oval_flow".into(),
            FlowKind::EllipseFlow => "ellipse_flow".into(),
        }
    }

    /// Whether the flow is defined for non-positive curvature.
    pub fn allows_nonconvex(&self) -> bool {
        match self {
            FlowKind::Geometric(f) => f.is_boundary_continuous(),
            FlowKind::AngenentOvalFlow => true,
            FlowKind::EllipseFlow => false,
        }
    }

    pub fn speed(&self) -> Option<&SpeedFunction> {
        match self {
            FlowKind::Geometric(f) => Some(f),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeStepPolicy {
    ExplicitCfl(f64),
    Fixed(f64),
}

impl Default for TimeStepPolicy {
    fn default() -> Self {
        TimeStepPolicy::ExplicitCfl(DEFAULT_CFL)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StopRules {
    pub max_kappa: f64,
    pub min_length: f64,
    /// Left out of serialized configs when infinite, which JSON cannot hold.
    #[serde(skip_serializing_if = "is_infinite")]
    pub max_time: f64,
    pub pole_margin: f64,
}

fn is_infinite(v: &f64) -> bool {
    v.is_infinite()
}

impl Default for StopRules {
    fn default() -> Self {
        Self {
            max_kappa: 1e4,
            min_length: 1e-6,
            max_time: f64::INFINITY,
            pole_margin: DEFAULT_POLE_MARGIN,
        }
    }
}

impl StopRules {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("max_kappa", self.max_kappa),
            ("min_length", self.min_length),
            ("max_time", self.max_time),
            ("pole_margin", self.pole_margin),
        ] {
            if !(v > 0.0) {
                return Err(Error::Precondition(format!("stop rule {name} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct FlowSpec {
    pub kind: FlowKind,
    pub time_step: TimeStepPolicy,
    pub stops: StopRules,
}

impl FlowSpec {
    pub fn new(kind: FlowKind) -> Self {
        Self {
            kind,
            time_step: TimeStepPolicy::default(),
            stops: StopRules::default(),
        }
    }

    pub fn curve_shortening() -> Self {
        Self::new(FlowKind::Geometric(SpeedFunction::mean_curvature(1)))
    }

    pub fn validate(&self) -> Result<()> {
        self.stops.validate()?;
        if let FlowKind::Geometric(f) = &self.kind {
            if f.n() != 1 {
                return Err(Error::Precondition(format!(
                    "curve flows need a speed of one curvature, `{}` has n = {}",
                    f.name(),
                    f.n()
                )));
            }
        }
        match self.time_step {
            TimeStepPolicy::ExplicitCfl(c) | TimeStepPolicy::Fixed(c) if !(c > 0.0) => Err(
                Error::Precondition("time step parameter must be positive".into()),
            ),
            _ => Ok(()),
        }
    }
}

/// Rate `d rho / dt` at one node and its sensitivity to the curvature.
fn node_rate(
    kind: &FlowKind,
    rho: f64,
    d1: f64,
    kappa: f64,
    v: f64,
    node: usize,
    want_slope: bool,
) -> Result<(f64, f64)> {
    match kind {
        FlowKind::Geometric(f) => {
            if kappa <= 0.0 && !f.is_boundary_continuous() {
                return Err(Error::ConvexityLost { node, kappa });
            }
            let (value, slope) = f.evaluate_1d(kappa, want_slope)?;
            Ok((-value * v, slope * v))
        }
        FlowKind::AngenentOvalFlow => {
            let (s, c) = rho.sin_cos();
            let tan = s / c;
            let sec2 = 1.0 / (c * c);
            let factor = v * (s * s + d1 * d1) / (tan * tan + sec2 * sec2 * d1 * d1);
            Ok((-kappa * factor, factor))
        }
        FlowKind::EllipseFlow => {
            if kappa <= 0.0 {
                return Err(Error::ConvexityLost { node, kappa });
            }
            let c2 = rho.cos().powi(2);
            let root = kappa.cbrt();
            Ok((-root * v * c2, root / (3.0 * kappa) * v * c2))
        }
    }
}

/// Per-node `d rho / dt`.
pub fn rhs(curve: &RadialCurve, kind: &FlowKind) -> Result<Vec<f64>> {
    (0..curve.len())
        .map(|i| {
            node_rate(
                kind,
                curve.rho[i],
                curve.rho_theta[i],
                curve.kappa[i],
                curve.v[i],
                i,
                false,
            )
            .map(|r| r.0)
        })
        .collect()
}

/// Largest effective diffusion coefficient of the linearized equation.
fn diffusivity(curve: &RadialCurve, kind: &FlowKind) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..curve.len() {
        let (_, sens) = node_rate(
            kind,
            curve.rho[i],
            curve.rho_theta[i],
            curve.kappa[i],
            curve.v[i],
            i,
            true,
        )?;
        // sin(rho) / w^3 = 1 / (v w^2)
        worst = worst.max(sens.abs() / (curve.v[i] * curve.w[i] * curve.w[i]));
    }
    Ok(worst)
}

/// Step size from the policy. For circles the explicit CFL rule reduces to
/// `c dtheta^2 / max(F'(kappa) (1 + kappa^2), 1)`.
pub fn stable_dt(curve: &RadialCurve, spec: &FlowSpec) -> Result<f64> {
    match spec.time_step {
        TimeStepPolicy::Fixed(dt) => Ok(dt),
        TimeStepPolicy::ExplicitCfl(c) => {
            let h = curve.spacing();
            Ok(c * h * h / diffusivity(curve, &spec.kind)?.max(1.0))
        }
    }
}

/// `d rho / dt` straight from radii, without building a full curve.
fn stage_rate(diff: &Differentiator, rho: &[f64], kind: &FlowKind) -> Result<Vec<f64>> {
    if let Some((node, &r)) = rho
        .iter()
        .enumerate()
        .find(|(_, r)| !(**r > 0.0 && **r < PI))
    {
        return Err(Error::PoleMargin { node, rho: r });
    }
    let (d1, mut d2) = diff.derivatives(rho);
    for i in 0..rho.len() {
        let (s, c) = rho[i].sin_cos();
        let w2 = s * s + d1[i] * d1[i];
        let wi = w2.sqrt();
        let kappa = (-d2[i] * s + 2.0 * d1[i] * d1[i] * c + c * s * s) / (w2 * wi);
        d2[i] = node_rate(kind, rho[i], d1[i], kappa, wi / s, i, false)?.0;
    }
    Ok(d2)
}

/// Advances by exactly `dt`.
pub fn step_by(curve: &RadialCurve, kind: &FlowKind, dt: f64) -> Result<RadialCurve> {
    let diff = curve.differentiator().clone();
    let first = rhs(curve, kind)?;
    let mut cached = Some(first);
    let next = rk4(&curve.rho, curve.t, dt, |y| match cached.take() {
        Some(k1) => Ok(k1),
        None => stage_rate(&diff, y, kind),
    })?;
    curve
        .with_rho(next, curve.t + dt)
        .map_err(|_| Error::NumericalBlowup { t: curve.t })
}

/// One explicit fourth-order step with the policy's step size.
pub fn step(curve: &RadialCurve, spec: &FlowSpec) -> Result<RadialCurve> {
    step_by(curve, &spec.kind, stable_dt(curve, spec)?)
}

#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Times at which the run lands exactly and stores a snapshot.
    pub checkpoints: Vec<f64>,
    /// Record a series row every this many steps.
    pub cadence: usize,
    pub max_steps: usize,
    /// Extra snapshots every this many steps, if set.
    pub snapshot_every: Option<usize>,
    /// Echoed into the manifest.
    pub config: Value,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            checkpoints: Vec::new(),
            cadence: 1,
            max_steps: 5_000_000,
            snapshot_every: None,
            config: Value::Null,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CurveRun {
    pub record: RunRecord,
    pub final_state: RadialCurve,
    /// States at the requested checkpoints that were reached, in order.
    pub checkpoint_states: Vec<RadialCurve>,
}

/// Steps until a stop rule fires, recording diagnostics along the way.
pub fn run(
    initial: RadialCurve,
    spec: &FlowSpec,
    quantities: &QuantitySet,
    opts: &RunOptions,
) -> Result<CurveRun> {
    spec.validate()?;
    quantities.validate(Geometry::Curve, spec.kind.speed().is_some())?;
    if !spec.kind.allows_nonconvex() && initial.kappa_min() <= 0.0 {
        return Err(Error::Precondition(
            "initial curve must be strictly convex for this flow".into(),
        ));
    }
    let started = Instant::now();
    let cadence = quantities.effective_cadence(opts.cadence);
    let mut manifest = Manifest::new("curve_flow", opts.config.clone());
    manifest
        .notes
        .insert("flow".into(), Value::String(spec.kind.name()));
    manifest
        .notes
        .insert("resolution".into(), Value::from(initial.len()));
    let mut series = Series::new(quantities.columns(Geometry::Curve));
    manifest.series_schema = series.columns.clone();

    let mut checkpoints: Vec<f64> = opts
        .checkpoints
        .iter()
        .cloned()
        .filter(|&t| t > initial.t)
        .collect();
    checkpoints.sort_by(f64::total_cmp);
    checkpoints.dedup();
    let mut next_checkpoint = 0;

    let mut history = FieldHistory::new(5);
    let mut state = initial;
    let mut snapshots = vec![state.snapshot("initial")];
    let mut checkpoint_states = Vec::new();
    let speed = spec.kind.speed();

    let record_row = |state: &RadialCurve, history: &FieldHistory, series: &mut Series| {
        let row = quantities::eval_curve(state, speed, quantities, history);
        series.push(row);
    };

    let speed_history = speed.filter(|_| quantities.contains(Quantity::HarnackMin));
    if let Some(f) = speed_history {
        if let Ok(values) = quantities::speed_field(&state, f) {
            history.push(state.t, values);
        }
    }
    record_row(&state, &history, &mut series);

    let mut steps = 0usize;
    let mut last_recorded = 0usize;
    let stop = loop {
        if let Err(Error::PoleMargin { node, rho }) = state.check_pole_margin(spec.stops.pole_margin) {
            manifest.stop_detail = Some(format!("node {node} at radius {rho}"));
            break StopReason::PoleMargin;
        }
        if state.kappa_max() > spec.stops.max_kappa {
            manifest.stop_detail = Some(format!("max kappa {}", state.kappa_max()));
            break StopReason::Collapse;
        }
        let length: f64 = (0..state.len()).map(|i| state.ds_weight(i)).sum();
        if length < spec.stops.min_length {
            manifest.stop_detail = Some(format!("length {length}"));
            break StopReason::Collapse;
        }
        if state.t >= spec.stops.max_time {
            break StopReason::MaxTime;
        }
        if state.kappa_min() <= 0.0 {
            if spec.kind.allows_nonconvex() {
                manifest.flag("convexity_lost_continued");
            } else {
                manifest.stop_detail = Some(format!("min kappa {}", state.kappa_min()));
                break StopReason::ConvexityLost;
            }
        }
        if steps >= opts.max_steps {
            manifest.stop_detail = Some("step budget exhausted".into());
            break StopReason::MaxTime;
        }

        let mut dt = match stable_dt(&state, spec) {
            Ok(dt) => dt,
            Err(Error::ConvexityLost { node, kappa }) => {
                manifest.stop_detail = Some(format!("node {node}, kappa {kappa}"));
                break StopReason::ConvexityLost;
            }
            Err(e) => {
                manifest.stop_detail = Some(e.to_string());
                break StopReason::Blowup;
            }
        };
        let mut target = spec.stops.max_time;
        if next_checkpoint < checkpoints.len() {
            target = target.min(checkpoints[next_checkpoint]);
        }
        let mut landing = false;
        if state.t + dt >= target * (1.0 - 1e-15) - 1e-300 && target.is_finite() {
            dt = target - state.t;
            landing = true;
        }

        let next = match step_by(&state, &spec.kind, dt) {
            Ok(next) => next,
            Err(Error::ConvexityLost { node, kappa }) => {
                manifest.stop_detail = Some(format!("node {node}, kappa {kappa}"));
                break StopReason::ConvexityLost;
            }
            Err(e) => {
                manifest.stop_detail = Some(e.to_string());
                break StopReason::Blowup;
            }
        };
        let jump = next
            .rho
            .iter()
            .zip(&state.rho)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if jump > 0.5 {
            manifest.stop_detail = Some(format!("radial jump {jump} in one step"));
            break StopReason::Blowup;
        }
        state = next;
        if landing {
            state.t = target;
        }
        steps += 1;

        if let Some(f) = speed_history {
            match quantities::speed_field(&state, f) {
                Ok(values) => history.push(state.t, values),
                Err(_) => history.clear(),
            }
        }
        if steps % cadence == 0 {
            record_row(&state, &history, &mut series);
            last_recorded = steps;
        }
        if landing && next_checkpoint < checkpoints.len() && state.t == checkpoints[next_checkpoint] {
            snapshots.push(state.snapshot(&format!("checkpoint_{next_checkpoint:03}")));
            checkpoint_states.push(state.clone());
            next_checkpoint += 1;
        }
        if let Some(every) = opts.snapshot_every {
            if every > 0 && steps % every == 0 {
                snapshots.push(state.snapshot(&format!("step_{steps:08}")));
            }
        }
    };
    if last_recorded != steps {
        record_row(&state, &history, &mut series);
    }
    snapshots.push(state.snapshot("final"));

    manifest.stop_reason = stop;
    manifest.steps = steps;
    manifest.final_time = state.t;
    manifest.wall_time_seconds = started.elapsed().as_secs_f64();
    let mut record = RunRecord::new(manifest, series);
    record.snapshots = snapshots;
    Ok(CurveRun {
        record,
        final_state: state,
        checkpoint_states,
    })
}

/// Distance of a radial graph to the equator in the C^1 sense:
/// `max |pi/2 - rho| + max |rho_theta|`.
pub fn c1_distance_to_equator(rho: &[f64], rho_theta: &[f64]) -> f64 {
    let c0 = rho.iter().map(|r| (FRAC_PI_2 - r).abs()).fold(0.0, f64::max);
    let c1 = rho_theta.iter().map(|d| d.abs()).fold(0.0, f64::max);
    c0 + c1
}
