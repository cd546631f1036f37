//! Rotationally symmetric hypersurfaces in the unit sphere of dimension n + 1,
//! written as graphs `u(psi)` over the polar angle of the equator measured from
//! the symmetry axis. Such a hypersurface has two principal curvatures: the
//! profile curvature and the rotational one of multiplicity n - 1.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::curve_flow::{graph_curvature, offset_circle_radius, StopRules, TimeStepPolicy};
use crate::error::{Error, Result};
use crate::quantities::{self, FieldHistory, Geometry, QuantitySet};
use crate::record::{Manifest, RunRecord, Series, Snapshot, StopReason};
use crate::spectral::{DiffMode, Differentiator};
use crate::speeds::SpeedFunction;
use crate::stepper::rk4;

#[derive(Clone, Debug)]
pub struct AxisymGraph {
    diff: Arc<Differentiator>,
    pub n: usize,
    pub t: f64,
    /// Values at `psi_j = j pi / M`, `j = 0..=M`.
    pub u: Vec<f64>,
    pub u_psi: Vec<f64>,
    pub u_psipsi: Vec<f64>,
    /// Curvature along the profile.
    pub kappa1: Vec<f64>,
    /// Rotational curvature.
    pub kappa2: Vec<f64>,
    pub w: Vec<f64>,
    pub v: Vec<f64>,
}

impl AxisymGraph {
    pub fn new(n: usize, u: Vec<f64>, t: f64, mode: DiffMode) -> Result<Self> {
        if u.len() < 5 {
            return Err(Error::Precondition("need at least 5 profile nodes".into()));
        }
        let diff = Arc::new(Differentiator::new(2 * (u.len() - 1), mode));
        Self::with_differentiator(diff, n, u, t)
    }

    pub fn with_differentiator(
        diff: Arc<Differentiator>,
        n: usize,
        u: Vec<f64>,
        t: f64,
    ) -> Result<Self> {
        if n < 2 {
            return Err(Error::Precondition(format!(
                "axisymmetric runs need n >= 2, got {n}"
            )));
        }
        let m = u.len() - 1;
        if diff.len() != 2 * m {
            return Err(Error::Precondition("grid size mismatch".into()));
        }
        if let Some((node, &r)) = u.iter().enumerate().find(|(_, r)| !(**r > 0.0 && **r < PI)) {
            return Err(Error::PoleMargin { node, rho: r });
        }
        let mut ext = u.clone();
        ext.extend(u[1..m].iter().rev());
        let (d1, d2) = diff.derivatives(&ext);
        let mut u_psi = d1[..=m].to_vec();
        let u_psipsi = d2[..=m].to_vec();
        u_psi[0] = 0.0;
        u_psi[m] = 0.0;

        let mut kappa1 = Vec::with_capacity(m + 1);
        let mut kappa2 = Vec::with_capacity(m + 1);
        let mut w = Vec::with_capacity(m + 1);
        let mut v = Vec::with_capacity(m + 1);
        for j in 0..=m {
            let (s, c) = u[j].sin_cos();
            let wj = (s * s + u_psi[j] * u_psi[j]).sqrt();
            let axial = if j == 0 || j == m {
                u_psipsi[j]
            } else {
                let psi = PI * j as f64 / m as f64;
                u_psi[j] / psi.tan()
            };
            kappa1.push(graph_curvature(u[j], u_psi[j], u_psipsi[j]));
            kappa2.push(c / wj - axial / (s * wj));
            w.push(wj);
            v.push(wj / s);
        }
        Ok(Self {
            diff,
            n,
            t,
            u,
            u_psi,
            u_psipsi,
            kappa1,
            kappa2,
            w,
            v,
        })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(n: usize, m: usize, mode: DiffMode, f: F) -> Result<Self> {
        let u = (0..=m).map(|j| f(PI * j as f64 / m as f64)).collect();
        Self::new(n, u, 0.0, mode)
    }

    pub fn with_u(&self, u: Vec<f64>, t: f64) -> Result<Self> {
        Self::with_differentiator(self.diff.clone(), self.n, u, t)
    }

    pub fn differentiator(&self) -> &Arc<Differentiator> {
        &self.diff
    }

    /// Number of intervals `M`.
    pub fn intervals(&self) -> usize {
        self.u.len() - 1
    }

    pub fn spacing(&self) -> f64 {
        PI / self.intervals() as f64
    }

    pub fn psi(&self, j: usize) -> f64 {
        PI * j as f64 / self.intervals() as f64
    }

    /// The full curvature vector `(kappa1, kappa2, ..., kappa2)` at node `j`.
    pub fn curvature_vector(&self, j: usize) -> Vec<f64> {
        let mut k = vec![self.kappa2[j]; self.n];
        k[0] = self.kappa1[j];
        k
    }

    pub fn kappa_min(&self) -> f64 {
        self.kappa1
            .iter()
            .chain(&self.kappa2)
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_pole_margin(&self, margin: f64) -> Result<()> {
        match self
            .u
            .iter()
            .enumerate()
            .find(|(_, &r)| !(r > margin && r < PI - margin))
        {
            Some((node, &rho)) => Err(Error::PoleMargin { node, rho }),
            None => Ok(()),
        }
    }

    pub fn snapshot(&self, name: &str) -> Snapshot {
        Snapshot {
            name: name.to_string(),
            t: self.t,
            columns: vec![
                "psi".into(),
                "u".into(),
                "kappa1".into(),
                "kappa2".into(),
            ],
            rows: (0..self.u.len())
                .map(|j| vec![self.psi(j), self.u[j], self.kappa1[j], self.kappa2[j]])
                .collect(),
        }
    }
}

/// Profile and rotational curvature per node.
pub fn principal_curvatures(g: &AxisymGraph) -> Result<(Vec<f64>, Vec<f64>)> {
    g.check_pole_margin(crate::curve_flow::DEFAULT_POLE_MARGIN)?;
    Ok((g.kappa1.clone(), g.kappa2.clone()))
}

fn check_speed(g: &AxisymGraph, speed: &SpeedFunction) -> Result<()> {
    if speed.n() != g.n {
        return Err(Error::Precondition(format!(
            "speed `{}` has n = {}, hypersurface has n = {}",
            speed.name(),
            speed.n(),
            g.n
        )));
    }
    Ok(())
}

fn node_rate(g: &AxisymGraph, speed: &SpeedFunction, j: usize) -> Result<(f64, f64)> {
    let k = g.curvature_vector(j);
    if !speed.is_boundary_continuous() && k.iter().any(|&x| x <= 0.0) {
        return Err(Error::ConvexityLost {
            node: j,
            kappa: k[0].min(k[1]),
        });
    }
    let value = speed.evaluate(&k)?;
    let grad = speed.gradient(&k)?;
    let weight: f64 = grad.iter().sum();
    Ok((-value * g.v[j], weight / (g.w[j] * g.w[j])))
}

/// Per-node `du/dt = -F(kappa1, kappa2, ..., kappa2) v`.
pub fn axi_rhs(g: &AxisymGraph, speed: &SpeedFunction) -> Result<Vec<f64>> {
    check_speed(g, speed)?;
    (0..g.u.len()).map(|j| node_rate(g, speed, j).map(|r| r.0)).collect()
}

pub fn stable_dt(g: &AxisymGraph, speed: &SpeedFunction, policy: TimeStepPolicy) -> Result<f64> {
    match policy {
        TimeStepPolicy::Fixed(dt) => Ok(dt),
        TimeStepPolicy::ExplicitCfl(c) => {
            let mut worst: f64 = 0.0;
            for j in 0..g.u.len() {
                worst = worst.max(node_rate(g, speed, j)?.1);
            }
            let h = g.spacing();
            Ok(c * h * h / worst.max(1.0))
        }
    }
}

pub fn axi_step_by(g: &AxisymGraph, speed: &SpeedFunction, dt: f64) -> Result<AxisymGraph> {
    check_speed(g, speed)?;
    let mut cached = Some(axi_rhs(g, speed)?);
    let next = rk4(&g.u, g.t, dt, |y| match cached.take() {
        Some(k1) => Ok(k1),
        None => {
            let state = g.with_u(y.to_vec(), g.t)?;
            axi_rhs(&state, speed)
        }
    })?;
    g.with_u(next, g.t + dt)
        .map_err(|_| Error::NumericalBlowup { t: g.t })
}

/// Initial data for axisymmetric runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialAxisym {
    Sphere { radius: f64 },
    /// `radius * (1 + amplitude * cos(mode * psi))`.
    PerturbedSphere { radius: f64, amplitude: f64, mode: u32 },
    /// Geodesic sphere centered `offset` away from the pole along the axis.
    OffsetSphere { radius: f64, offset: f64 },
}

impl InitialAxisym {
    pub fn radius_at(&self, psi: f64) -> f64 {
        match *self {
            InitialAxisym::Sphere { radius } => radius,
            InitialAxisym::PerturbedSphere {
                radius,
                amplitude,
                mode,
            } => radius * (1.0 + amplitude * (mode as f64 * psi).cos()),
            InitialAxisym::OffsetSphere { radius, offset } => {
                offset_circle_radius(radius, offset, psi)
            }
        }
    }

    pub fn build(&self, n: usize, m: usize, mode: DiffMode) -> Result<AxisymGraph> {
        AxisymGraph::from_fn(n, m, mode, |psi| self.radius_at(psi))
    }
}

#[derive(Clone, Debug)]
pub struct AxisymRun {
    pub record: RunRecord,
    pub final_state: AxisymGraph,
    /// Every state the run passed through, when requested.
    pub states: Vec<AxisymGraph>,
}

#[derive(Clone, Debug)]
pub struct AxisymOptions {
    pub time_step: TimeStepPolicy,
    pub cadence: usize,
    pub max_steps: usize,
    pub keep_states: bool,
    pub config: Value,
}

impl Default for AxisymOptions {
    fn default() -> Self {
        Self {
            time_step: TimeStepPolicy::default(),
            cadence: 1,
            max_steps: 5_000_000,
            keep_states: false,
            config: Value::Null,
        }
    }
}

pub fn axi_run(
    initial: AxisymGraph,
    speed: &SpeedFunction,
    stops: &StopRules,
    quantities: &QuantitySet,
    opts: &AxisymOptions,
) -> Result<AxisymRun> {
    stops.validate()?;
    check_speed(&initial, speed)?;
    quantities.validate(Geometry::Axisym, true)?;
    if initial.kappa_min() <= 0.0 {
        return Err(Error::Precondition(
            "initial hypersurface must be strictly convex".into(),
        ));
    }
    let started = Instant::now();
    let mut manifest = Manifest::new("axisym_flow", opts.config.clone());
    manifest
        .notes
        .insert("speed".into(), Value::String(speed.name().to_string()));
    manifest.notes.insert("n".into(), Value::from(initial.n));
    manifest
        .notes
        .insert("intervals".into(), Value::from(initial.intervals()));
    let mut series = Series::new(quantities.columns(Geometry::Axisym));
    manifest.series_schema = series.columns.clone();
    let cadence = quantities.effective_cadence(opts.cadence);
    let history = FieldHistory::new(1);

    let mut state = initial;
    let mut snapshots = vec![state.snapshot("initial")];
    let mut states = Vec::new();
    if opts.keep_states {
        states.push(state.clone());
    }
    series.push(quantities::eval_axisym(&state, Some(speed), quantities, &history));
    let mut steps = 0usize;
    let mut last_recorded = 0usize;
    let stop = loop {
        if let Err(Error::PoleMargin { node, rho }) = state.check_pole_margin(stops.pole_margin) {
            manifest.stop_detail = Some(format!("node {node} at radius {rho}"));
            break StopReason::PoleMargin;
        }
        let kmax = state
            .kappa1
            .iter()
            .chain(&state.kappa2)
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        if kmax > stops.max_kappa {
            manifest.stop_detail = Some(format!("max kappa {kmax}"));
            break StopReason::Collapse;
        }
        if state.t >= stops.max_time {
            break StopReason::MaxTime;
        }
        if state.kappa_min() <= 0.0 {
            if speed.is_boundary_continuous() {
                manifest.flag("convexity_lost_continued");
            } else {
                break StopReason::ConvexityLost;
            }
        }
        if steps >= opts.max_steps {
            manifest.stop_detail = Some("step budget exhausted".into());
            break StopReason::MaxTime;
        }
        let mut dt = match stable_dt(&state, speed, opts.time_step) {
            Ok(dt) => dt,
            Err(Error::ConvexityLost { .. }) => break StopReason::ConvexityLost,
            Err(e) => {
                manifest.stop_detail = Some(e.to_string());
                break StopReason::Blowup;
            }
        };
        let mut landing = false;
        if stops.max_time.is_finite() && state.t + dt >= stops.max_time {
            dt = stops.max_time - state.t;
            landing = true;
        }
        let next = match axi_step_by(&state, speed, dt) {
            Ok(next) => next,
            Err(Error::ConvexityLost { .. }) => break StopReason::ConvexityLost,
            Err(e) => {
                manifest.stop_detail = Some(e.to_string());
                break StopReason::Blowup;
            }
        };
        let jump = next
            .u
            .iter()
            .zip(&state.u)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if jump > 0.5 {
            manifest.stop_detail = Some(format!("radial jump {jump} in one step"));
            break StopReason::Blowup;
        }
        state = next;
        if landing {
            state.t = stops.max_time;
        }
        steps += 1;
        if opts.keep_states {
            states.push(state.clone());
        }
        if steps % cadence == 0 {
            series.push(quantities::eval_axisym(&state, Some(speed), quantities, &history));
            last_recorded = steps;
        }
    };
    if last_recorded != steps {
        series.push(quantities::eval_axisym(&state, Some(speed), quantities, &history));
    }
    snapshots.push(state.snapshot("final"));
    manifest.stop_reason = stop;
    manifest.steps = steps;
    manifest.final_time = state.t;
    manifest.wall_time_seconds = started.elapsed().as_secs_f64();
    let mut record = RunRecord::new(manifest, series);
    record.snapshots = snapshots;
    Ok(AxisymRun {
        record,
        final_state: state,
        states,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_graph_is_umbilic() {
        let g = AxisymGraph::from_fn(3, 32, DiffMode::Spectral, |_| 0.8).unwrap();
        for j in 0..=32 {
            assert!((g.kappa1[j] - 1.0 / 0.8f64.tan()).abs() < 1e-13);
            assert!((g.kappa2[j] - 1.0 / 0.8f64.tan()).abs() < 1e-13);
        }
    }

    #[test]
    fn constant_graph_rates() {
        let u0: f64 = 0.6;
        for n in 2..=4 {
            let g = AxisymGraph::from_fn(n, 16, DiffMode::Spectral, |_| u0).unwrap();
            let nf = n as f64;
            let cot = 1.0 / u0.tan();
            let h = axi_rhs(&g, &SpeedFunction::mean_curvature(n)).unwrap();
            assert!((h[4] + nf * cot).abs() < 1e-12);
            let a = axi_rhs(&g, &SpeedFunction::builtin("norm_of_A", &[], n).unwrap()).unwrap();
            assert!((a[4] + nf * cot).abs() < 1e-12);
            let s = axi_rhs(&g, &SpeedFunction::builtin("H^p", &[0.5], n).unwrap()).unwrap();
            assert!((s[4] + nf * cot.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn poles_are_umbilic() {
        let g = AxisymGraph::from_fn(2, 64, DiffMode::Spectral, |p| 0.9 + 0.05 * (2.0 * p).cos())
            .unwrap();
        assert!((g.kappa1[0] - g.kappa2[0]).abs() < 1e-12);
        assert!((g.kappa1[64] - g.kappa2[64]).abs() < 1e-12);
    }

    #[test]
    fn rejects_curves() {
        assert!(AxisymGraph::from_fn(1, 16, DiffMode::Spectral, |_| 0.5).is_err());
    }
}
